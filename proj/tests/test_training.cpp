#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mvsd/checkpoint.hpp"
#include "mvsd/metrics.hpp"
#include "mvsd/model.hpp"
#include "mvsd/optim.hpp"
#include "mvsd/training.hpp"
#include "test_util.hpp"

using namespace mvsd;
using namespace testutil;

namespace {

MvsdConfig tiny_model() {
  MvsdConfig c;
  c.semantic_dim = 16;
  c.knowledge_dim = 4;
  c.hidden = 8;
  c.classifier_hidden = 8;
  c.dropout = 0.0;
  return c;
}

// Brute-force AUC over all positive/negative pairs.
double pair_auc(const std::vector<int>& y, const std::vector<double>& s) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return wins / pairs;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE_BEGIN("training");

TEST_CASE("metric hand examples") {
  // TP=2, FP=1, FN=1, TN=6.
  const std::vector<int> y = {1, 1, 0, 1, 0, 0, 0, 0, 0, 0};
  const std::vector<double> s = {0.9, 0.8, 0.7, 0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1};
  const Confusion c = confusion(y, s);
  CHECK(c.tp == 2);
  CHECK(c.fp == 1);
  CHECK(c.fn == 1);
  CHECK(c.tn == 6);
  CHECK(f1_score(c) == doctest::Approx(0.666667).epsilon(1e-6));
  CHECK(accuracy(c) == 0.8);

  const std::vector<int> y2 = {1, 1, 0, 0};
  const std::vector<double> s2 = {0.8, 0.4, 0.6, 0.2};
  CHECK(*roc_auc(y2, s2) == 0.75);

  const std::vector<double> perfect = {1.0, 1.0, 0.0, 0.0};
  const EvalReport r = make_report(y2, perfect, 0.0);
  CHECK(r.f1 == 1.0);
  CHECK(r.accuracy == 1.0);
  CHECK(r.auc == 1.0);
  CHECK(r.auc_defined);
}

TEST_CASE("metric edge conventions") {
  const std::vector<int> neg = {0, 0, 0};
  const std::vector<double> low = {0.1, 0.2, 0.3};
  CHECK(f1_score(confusion(neg, low)) == 0.0);
  CHECK(roc_auc(neg, low) == std::nullopt);
  const EvalReport r = make_report(neg, low, 0.5);
  CHECK_FALSE(r.auc_defined);
  CHECK(std::isnan(r.auc));
  // A score of exactly 0.5 is a negative prediction.
  const std::vector<int> one = {1};
  const std::vector<double> half = {0.5};
  CHECK(confusion(one, half).fn == 1);
  // All ties give AUC 0.5.
  const std::vector<int> y = {1, 0, 1, 0};
  const std::vector<double> same(4, 0.3);
  CHECK(*roc_auc(y, same) == 0.5);
  CHECK_THROWS_AS(confusion(y, low), std::invalid_argument);
}

TEST_CASE("metrics agree with brute-force references") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(60);
    std::vector<int> y(n);
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.bernoulli(0.4);
      // Coarse scores so ties occur.
      s[i] = trial % 2 ? std::round(rng.uniform() * 10) / 10 : rng.uniform();
    }
    y[0] = 1;
    y[1] = 0;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool pred = s[i] > 0.5;
      tp += pred && y[i];
      fp += pred && !y[i];
      fn += !pred && y[i];
      tn += !pred && !y[i];
    }
    const double prec = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    const double rec = double(tp) / double(tp + fn);
    const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    const EvalReport r = make_report(y, s, 0.0);
    CHECK(std::abs(r.f1 - f1) < 1e-12);
    CHECK(std::abs(r.accuracy - double(tp + tn) / double(n)) < 1e-12);
    CHECK(std::abs(r.auc - pair_auc(y, s)) < 1e-12);
  }
}

TEST_CASE("adamw decays weights under a zero gradient") {
  Parameter p("w", Tensor::from_rows({{1.0, -2.0}}));
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.5;
  AdamW opt({&p}, cfg);
  opt.zero_grad();
  opt.step();
  CHECK(p.value(0, 0) == doctest::Approx(1.0 * (1 - 0.1 * 0.5)));
  CHECK(p.value(0, 1) == doctest::Approx(-2.0 * (1 - 0.1 * 0.5)));
  CHECK(opt.steps() == 1);
}

TEST_CASE("adamw first step moves each entry by about lr against its gradient") {
  Parameter p("w", Tensor::from_rows({{0.0, 0.0, 0.0}}));
  AdamWConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.0;
  AdamW opt({&p}, cfg);
  p.grad = Tensor::from_rows({{2.0, -0.5, 0.0}});
  opt.step();
  CHECK(p.value(0, 0) == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(p.value(0, 1) == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(p.value(0, 2) == 0.0);
}

TEST_CASE("adamw minimizes a quadratic") {
  Parameter p("w", Tensor::from_rows({{3.0, -1.0}}));
  AdamWConfig cfg;
  cfg.lr = 0.05;
  cfg.weight_decay = 0.0;
  AdamW opt({&p}, cfg);
  for (int i = 0; i < 2000; ++i) {
    opt.zero_grad();
    p.grad(0, 0) = 2 * (p.value(0, 0) - 1.0);
    p.grad(0, 1) = 2 * (p.value(0, 1) + 4.0);
    opt.step();
  }
  CHECK(p.value(0, 0) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(p.value(0, 1) == doctest::Approx(-4.0).epsilon(1e-3));
}

TEST_CASE("plateau scheduler") {
  PlateauScheduler s(5, 0.1);
  double lr = 1e-3;
  lr = s.step(0.5, lr);
  for (int i = 0; i < 5; ++i) lr = s.step(0.5, lr);
  CHECK(lr == doctest::Approx(1e-4));
  CHECK(s.reductions() == 1);
  for (int i = 0; i < 5; ++i) lr = s.step(0.4, lr);
  CHECK(lr == doctest::Approx(1e-5));
  CHECK(s.reductions() == 2);
  lr = s.step(0.9, lr);
  CHECK(s.bad_epochs() == 0);
  CHECK(lr == doctest::Approx(1e-5));
  PlateauScheduler t(2, 0.5);
  double l2 = 1.0;
  l2 = t.step(0.1, l2);
  l2 = t.step(0.1, l2);
  CHECK(l2 == 1.0);
  l2 = t.step(0.1, l2);
  CHECK(l2 == 0.5);
}

TEST_CASE("make_split sizes and determinism") {
  const auto s = make_split(10, 0.7, 0.2, 0.1, 3);
  CHECK(std::count(s.begin(), s.end(), Split::Train) == 7);
  CHECK(std::count(s.begin(), s.end(), Split::Valid) == 2);
  CHECK(std::count(s.begin(), s.end(), Split::Test) == 1);
  CHECK(make_split(10, 0.7, 0.2, 0.1, 3) == s);
  const auto all = make_split(10, 1, 0, 0, 3);
  CHECK(std::count(all.begin(), all.end(), Split::Train) == 10);
  const auto big = make_split(500, 0.7, 0.2, 0.1, 9);
  CHECK(std::count(big.begin(), big.end(), Split::Test) == 50);
  CHECK_THROWS_AS(make_split(10, 0.5, 0.2, 0.1, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_split(0, 0.7, 0.2, 0.1, 0), std::invalid_argument);
}

TEST_CASE("a single 32-review batch overfits in 500 steps") {
  const Dataset ds = random_dataset(77, 6, 8, 32, 4);
  const HeteroGraph g = build_graph(ds);
  const GraphIndex idx(g);
  const FeatureTable ft = make_features(ds, g, 16, 4);
  MvsdModel model(tiny_model(), 1);
  AdamWConfig oc;
  oc.lr = 1e-2;
  AdamW opt(model.parameters(), oc);
  for (int step = 0; step < 500; ++step) {
    Tape tape;
    Rng rng(step);
    const Var loss = cross_entropy(model.forward(tape, g, idx, ft, {}, true, rng), g.labels);
    opt.zero_grad();
    tape.backward(loss);
    opt.step();
  }
  const EvalReport r = evaluate(model, g, idx, ft, Split::Train);
  CHECK(r.f1 == 1.0);
  CHECK(r.accuracy == 1.0);
}

TEST_CASE("train selects the best validation epoch and is reproducible") {
  Dataset ds = random_dataset(5, 6, 8, 60, 4);
  HeteroGraph g = build_graph(ds);
  g.splits = make_split(g.review_count(), 0.7, 0.2, 0.1, 1);
  FeatureTable ft = make_features(ds, g, 16, 4);
  TrainConfig tc;
  tc.epochs = 6;
  tc.batch_size = 16;
  tc.fanout = 3;
  tc.seed = 4;
  MvsdModel a(tiny_model(), 2), b(tiny_model(), 2);
  std::vector<HistoryRow> seen;
  const TrainResult ra = train(a, g, ft, tc, [&](const HistoryRow& h) { seen.push_back(h); });
  const TrainResult rb = train(b, g, ft, tc);
  REQUIRE(ra.history.size() == 6);
  CHECK(seen.size() == 6);
  CHECK(format_history(ra.history) == format_history(rb.history));
  CHECK(ra.steps == 6 * 3);
  for (const Parameter* p : std::as_const(a).parameters()) CHECK(p->value == b.find(p->name)->value);
  // The kept weights reproduce the best epoch's validation F1.
  const EvalReport v = evaluate(a, g, ft, Split::Valid);
  CHECK(v.f1 == ra.history[ra.best_epoch - 1].val_f1);
  CHECK(ra.best_val_f1 == v.f1);
  for (const auto& h : ra.history) CHECK(h.val_f1 <= ra.best_val_f1);
  const std::string hist = format_history(ra.history);
  CHECK(std::count(hist.begin(), hist.end(), '\n') == 6);
}

TEST_CASE("full-graph training without sampling also runs") {
  Dataset ds = random_dataset(6, 4, 5, 30, 3);
  HeteroGraph g = build_graph(ds);
  g.splits = make_split(g.review_count(), 0.7, 0.2, 0.1, 1);
  const FeatureTable ft = make_features(ds, g, 16, 4);
  TrainConfig tc;
  tc.epochs = 3;
  tc.sample = false;
  MvsdModel m(tiny_model(), 1);
  const TrainResult r = train(m, g, ft, tc);
  CHECK(r.history.size() == 3);
  CHECK(r.steps == 3);
  tc.batch_size = 0;
  CHECK_THROWS_AS(train(m, g, ft, tc), std::invalid_argument);
}

TEST_CASE("non-finite loss aborts training") {
  Dataset ds = random_dataset(6, 4, 5, 30, 3);
  HeteroGraph g = build_graph(ds);
  g.splits = make_split(g.review_count(), 0.7, 0.2, 0.1, 1);
  FeatureTable ft = make_features(ds, g, 16, 4);
  ft.at(SubgraphId::M, 1)(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig tc;
  tc.epochs = 2;
  MvsdModel m(tiny_model(), 1);
  CHECK_THROWS_AS(train(m, g, ft, tc), std::runtime_error);
}

TEST_CASE("checkpoints round trip byte for byte") {
  MvsdModel m(tiny_model(), 3);
  const auto dir = temp_dir("ckpt");
  const Checkpoint ck = make_checkpoint(m, "seed=3\n");
  save_checkpoint(ck, dir / "a.ckpt");
  const Checkpoint back = load_checkpoint(dir / "a.ckpt");
  CHECK(back.config_text == "seed=3\n");
  REQUIRE(back.tensors.size() == ck.tensors.size());
  MvsdModel other(tiny_model(), 99);
  load_weights(other, back);
  for (const Parameter* p : std::as_const(m).parameters()) CHECK(p->value == other.find(p->name)->value);
  save_checkpoint(make_checkpoint(other, "seed=3\n"), dir / "b.ckpt");
  CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));

  MvsdConfig wider = tiny_model();
  wider.hidden = 9;
  MvsdModel mismatch(wider, 1);
  CHECK_THROWS(load_weights(mismatch, back));

  const std::string bytes = slurp(dir / "a.ckpt");
  std::ofstream(dir / "trunc.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  CHECK_THROWS_AS(load_checkpoint(dir / "trunc.ckpt"), DataError);
  std::ofstream(dir / "magic.ckpt", std::ios::binary) << "NOTACKPT" << bytes.substr(8);
  CHECK_THROWS_AS(load_checkpoint(dir / "magic.ckpt"), DataError);
}

TEST_SUITE_END();
