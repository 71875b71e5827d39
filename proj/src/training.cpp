#include "mvsd/training.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <fstream>
#include <stdexcept>

#include "mvsd/rng.hpp"

namespace mvsd {

std::string format_history(const std::vector<HistoryRow>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.epoch, r.train_loss, r.val_f1, r.val_auc,
                       r.val_acc, r.lr);
  }
  return out;
}

void write_history(const std::vector<HistoryRow>& rows, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << format_history(rows);
  if (!out) throw std::runtime_error("write failed for " + file.string());
}

std::vector<Split> make_split(std::size_t n, double train, double valid, double test, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("cannot split an empty review list");
  if (train < 0 || valid < 0 || test < 0 || std::abs(train + valid + test - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must be non-negative and sum to 1");
  }
  const auto n_valid = static_cast<std::size_t>(std::llround(valid * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::llround(test * static_cast<double>(n)));
  if (n_valid + n_test > n) throw std::invalid_argument("split ratios leave no room for training reviews");
  std::vector<std::uint32_t> order(n);
  for (std::uint32_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::uint32_t>(order));
  std::vector<Split> out(n, Split::Train);
  const std::size_t n_train = n - n_valid - n_test;
  for (std::size_t k = n_train; k < n_train + n_valid; ++k) out[order[k]] = Split::Valid;
  for (std::size_t k = n_train + n_valid; k < n; ++k) out[order[k]] = Split::Test;
  return out;
}

std::vector<double> predict(MvsdModel& model, const HeteroGraph& g, const GraphIndex& index, const FeatureTable& feats,
                            std::span<const std::uint32_t> reviews, double* loss) {
  Tape tape;
  Rng unused(0);
  const Var logits = model.forward(tape, g, index, feats, reviews, false, unused);
  if (loss) {
    std::vector<int> labels;
    labels.reserve(reviews.size());
    for (auto r : reviews) labels.push_back(g.labels[r]);
    *loss = cross_entropy(logits, labels).value().item();
  }
  return spoiler_probabilities(logits.value());
}

EvalReport evaluate(MvsdModel& model, const HeteroGraph& g, const GraphIndex& index, const FeatureTable& feats,
                    Split part) {
  const auto reviews = g.reviews_in(part);
  if (reviews.empty()) throw std::invalid_argument(fmt::format("the {} split has no reviews", split_name(part)));
  double loss = 0;
  const auto scores = predict(model, g, index, feats, reviews, &loss);
  std::vector<int> labels;
  for (auto r : reviews) labels.push_back(g.labels[r]);
  return make_report(labels, scores, loss);
}

EvalReport evaluate(MvsdModel& model, const HeteroGraph& g, const FeatureTable& feats, Split part) {
  return evaluate(model, g, GraphIndex(g), feats, part);
}

TrainResult train(MvsdModel& model, const HeteroGraph& g, const FeatureTable& feats, const TrainConfig& cfg,
                  const std::function<void(const HistoryRow&)>& on_epoch) {
  if (cfg.batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
  if (cfg.fanout == 0) throw std::invalid_argument("fanout must be at least 1");
  std::vector<std::uint32_t> train_ids = g.reviews_in(Split::Train);
  if (train_ids.empty()) throw std::invalid_argument("the training split has no reviews");
  // Without validation reviews, model selection falls back to the training set.
  const Split select = g.reviews_in(Split::Valid).empty() ? Split::Train : Split::Valid;

  const GraphIndex full(g);
  auto params = model.parameters();
  AdamW opt(params, cfg.optimizer);
  opt.zero_grad();
  PlateauScheduler sched(cfg.patience, cfg.lr_factor);
  Rng shuffle_rng(derive_seed(cfg.seed, "train.shuffle"));
  Rng sample_rng(derive_seed(cfg.seed, "train.sample"));
  Rng dropout_rng(derive_seed(cfg.seed, "train.dropout"));

  TrainResult result;
  std::vector<Tensor> best;
  double best_f1 = -1.0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::uint32_t>(train_ids));
    double loss_sum = 0;
    std::size_t batch_index = 0;
    const double lr_used = opt.lr();
    for (std::size_t start = 0; start < train_ids.size(); start += cfg.batch_size, ++batch_index) {
      const std::span<const std::uint32_t> seeds(train_ids.data() + start,
                                                 std::min(cfg.batch_size, train_ids.size() - start));
      std::vector<int> labels;
      labels.reserve(seeds.size());
      for (auto r : seeds) labels.push_back(g.labels[r]);
      // The sampled graph and its index must outlive backward().
      std::optional<SampledGraph> sg;
      std::optional<FeatureTable> sf;
      std::optional<GraphIndex> sidx;
      Tape tape;
      Var logits;
      if (cfg.sample) {
        sg = sample_neighborhood(g, full, seeds, cfg.fanout, model.config().layers, sample_rng.next_u64());
        sf = feats.gather(*sg);
        sidx.emplace(sg->graph);
        logits = model.forward(tape, sg->graph, *sidx, *sf, sg->seeds, true, dropout_rng);
      } else {
        logits = model.forward(tape, g, full, feats, seeds, true, dropout_rng);
      }
      const Var loss = cross_entropy(logits, labels);
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw std::runtime_error(fmt::format("non-finite training loss at epoch {} batch {}", epoch, batch_index));
      }
      tape.backward(loss);
      opt.step();
      opt.zero_grad();
      loss_sum += value * static_cast<double>(seeds.size());
      ++result.steps;
    }
    const EvalReport val = evaluate(model, g, full, feats, select);
    HistoryRow row{epoch, loss_sum / static_cast<double>(train_ids.size()), val.f1, val.auc, val.accuracy, lr_used};
    result.history.push_back(row);
    if (val.f1 > best_f1) {
      best_f1 = val.f1;
      result.best_epoch = epoch;
      best.clear();
      for (const Parameter* p : params) best.push_back(p->value);
    }
    opt.set_lr(sched.step(val.f1, opt.lr()));
    if (on_epoch) on_epoch(row);
  }
  if (!best.empty())
    for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = best[k];
  result.best_val_f1 = std::max(best_f1, 0.0);
  return result;
}

}  // namespace mvsd
