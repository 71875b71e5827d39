// Command-line driver: synthetic data, TransE, training, evaluation,
// prediction and ablations. Exit codes: 0 ok, 1 validation error, 2 runtime failure.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mvsd/checkpoint.hpp"
#include "mvsd/kge.hpp"
#include "mvsd/pipeline.hpp"
#include "mvsd/records.hpp"
#include "mvsd/run_config.hpp"
#include "mvsd/synthetic.hpp"
#include "mvsd/training.hpp"

namespace fs = std::filesystem;
using namespace mvsd;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

/// Raised for failures that are not about bad input.
struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + file.string());
  out << text;
  if (!out) throw RuntimeFailure("write failed for " + file.string());
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + file.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string report_text(std::string_view prefix, const EvalReport& r) {
  return fmt::format("{0}_f1={1:.17g}\n{0}_auc={2:.17g}\n{0}_acc={3:.17g}\n{0}_loss={4:.17g}\n{0}_tp={5}\n{0}_fp={6}\n"
                     "{0}_fn={7}\n{0}_tn={8}\n",
                     prefix, r.f1, r.auc_defined ? r.auc : std::nan(""), r.accuracy, r.loss, r.counts.tp, r.counts.fp,
                     r.counts.fn, r.counts.tn);
}

/// Flags shared by the commands that build a RunConfig. Precedence:
/// defaults, then --config, then explicit flags, then --set in order.
struct RunFlags {
  std::string config;
  std::optional<std::string> data, kge, out, embeddings;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::vector<std::string> sets;

  void attach(CLI::App* cmd, bool need_out) {
    cmd->add_option("--config", config, "key=value run configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--data", data, "dataset directory");
    cmd->add_option("--kge", kge, "entity embedding file, or 'none' for zero knowledge features");
    cmd->add_option("--embeddings", embeddings, "precomputed text embedding file");
    auto* o = cmd->add_option("--out", out, "output directory");
    if (need_out) o->required();
    cmd->add_option("--seed", seed, "master seed");
    cmd->add_option("--epochs", epochs, "training epochs");
    cmd->add_option("--set", sets, "override any config key (key=value), repeatable");
  }

  RunConfig resolve() const {
    RunConfig rc = config.empty() ? RunConfig{} : load_run_config(config);
    if (data) rc.data = *data;
    if (kge) rc.kge = *kge;
    if (embeddings) rc.embeddings = *embeddings;
    if (out) rc.out = *out;
    if (seed) rc.seed = *seed;
    if (epochs) rc.epochs = *epochs;
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
      rc.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (rc.data.empty()) throw std::invalid_argument("no dataset given (--data or data= in --config)");
    rc.validate();
    return rc;
  }
};

// ---- gen-synthetic ------------------------------------------------------------

struct GenFlags {
  std::string out, config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_reviews, n_movies, n_users;
  std::optional<std::string> signal;
};

int cmd_gen(const GenFlags& f) {
  SyntheticConfig cfg = f.config.empty() ? SyntheticConfig{} : parse_synthetic_config(read_text(f.config));
  if (f.seed) cfg.seed = *f.seed;
  if (f.n_reviews) cfg.n_reviews = *f.n_reviews;
  if (f.n_movies) cfg.n_movies = *f.n_movies;
  if (f.n_users) cfg.n_users = *f.n_users;
  if (f.signal) cfg.signal = parse_signal(*f.signal);
  cfg.validate();
  const Dataset ds = gen_synthetic(cfg);
  write_synthetic(ds, f.out);
  write_text(fs::path(f.out) / "synthetic.cfg", cfg.to_text());
  std::size_t spoilers = 0;
  for (const auto& r : ds.reviews) spoilers += r.is_spoiler ? 1 : 0;
  fmt::print("wrote {} reviews ({} spoilers), {} movies, {} users to {}\n", ds.reviews.size(), spoilers,
             ds.movies.size(), ds.users.size(), f.out);
  return 0;
}

// ---- train-kge ---------------------------------------------------------------

int cmd_train_kge(RunFlags flags, std::optional<std::size_t> dim, std::optional<double> margin,
                  std::optional<std::size_t> kge_epochs) {
  // --epochs here means TransE epochs.
  flags.epochs.reset();
  RunConfig rc = flags.resolve();
  if (dim) rc.kge_dim = *dim;
  if (margin) rc.kge_margin = *margin;
  if (kge_epochs) rc.kge_epochs = *kge_epochs;
  rc.validate();
  const Dataset ds = load_dataset(rc.data);
  const HeteroGraph g = build_graph(ds);
  const TripleStore kb = kb_from_graph(g, ds.casts);
  std::vector<double> losses;
  const KgeModel m = train_kge(kb, rc.kge_config(), &losses);
  const double untrained = eval_kge(init_kge(kb, rc.kge_config()), kb, kb, 10, stage_seed(rc, "kge.eval"));
  const double trained = eval_kge(m, kb, kb, 10, stage_seed(rc, "kge.eval"));
  const fs::path out(rc.out);
  fs::create_directories(out);
  rc.kge = (out / "kge_embeddings.tsv").string();
  save_kge_embeddings(m, rc.kge);
  const std::string report =
      fmt::format("triples={}\nentities={}\ndim={}\nfinal_loss={:.17g}\nconcordance_untrained={:.17g}\nconcordance={:.17g}\n",
                  kb.size(), m.entity_count(), m.dim(), losses.empty() ? 0.0 : losses.back(), untrained, trained);
  write_text(out / "kge_report.txt", report);
  save_run_config(rc, out / "run.cfg");
  std::cout << report;
  return 0;
}

// ---- train -------------------------------------------------------------------

int cmd_train(const RunFlags& flags, bool quiet) {
  const RunConfig rc = flags.resolve();
  const fs::path out(rc.out);
  fs::create_directories(out);
  save_run_config(rc, out / "run.cfg");
  const BaseData base = prepare(load_dataset(rc.data), rc);
  const RunOutcome res = run_experiment(base, rc, [&](const HistoryRow& row) {
    if (!quiet) {
      fmt::print("epoch {:3d}  loss {:.4f}  val_f1 {:.4f}  val_auc {:.4f}  lr {:.1e}\n", row.epoch, row.train_loss,
                 row.val_f1, row.val_auc, row.lr);
    }
  });
  write_history(res.result.history, out / "history.csv");
  save_checkpoint(make_checkpoint(res.model, rc.to_text()), out / "model.ckpt");
  std::string metrics = fmt::format("best_epoch={}\n", res.result.best_epoch) + report_text("val", res.valid);
  if (res.test) metrics += report_text("test", *res.test);
  write_text(out / "metrics.txt", metrics);
  std::cout << metrics;
  return 0;
}

// ---- evaluate / predict --------------------------------------------------------

struct Restored {
  RunConfig rc;
  Experiment ex;
  MvsdModel model;
};

Restored restore(const std::string& ckpt_path, const std::optional<std::string>& data) {
  const Checkpoint ck = load_checkpoint(ckpt_path);
  RunConfig rc = parse_run_config(ck.config_text);
  if (data) rc.data = *data;
  rc.validate();
  const BaseData base = prepare(load_dataset(rc.data), rc);
  Restored r{rc, apply_ablation(base, rc), MvsdModel(rc.model_config(), stage_seed(rc, "model"))};
  load_weights(r.model, ck);
  return r;
}

int cmd_evaluate(const std::string& ckpt, const std::optional<std::string>& data, const std::string& split,
                 const std::optional<std::string>& out_dir) {
  Split part;
  if (split == "train") part = Split::Train;
  else if (split == "valid") part = Split::Valid;
  else if (split == "test") part = Split::Test;
  else throw std::invalid_argument("--split must be train, valid or test");
  Restored r = restore(ckpt, data);
  const EvalReport rep = evaluate(r.model, r.ex.graph, r.ex.features, part);
  const std::string text = report_text(split_name(part), rep);
  if (out_dir) {
    fs::create_directories(*out_dir);
    save_run_config(r.rc, fs::path(*out_dir) / "run.cfg");
    write_text(fs::path(*out_dir) / "eval.txt", text);
  }
  std::cout << text;
  return 0;
}

int cmd_predict(const std::string& ckpt, const std::optional<std::string>& data, const std::vector<std::string>& ids,
                const std::optional<std::string>& out_dir) {
  Restored r = restore(ckpt, data);
  const HeteroGraph& g = r.ex.graph;
  std::vector<std::uint32_t> reviews;
  if (ids.empty()) {
    for (std::uint32_t k = 0; k < g.review_count(); ++k) reviews.push_back(k);
  } else {
    for (const auto& id : ids) {
      const auto it = std::find(g.review_ids.begin(), g.review_ids.end(), id);
      if (it == g.review_ids.end()) throw std::invalid_argument("unknown review id '" + id + "'");
      reviews.push_back(static_cast<std::uint32_t>(it - g.review_ids.begin()));
    }
  }
  const auto probs = predict(r.model, g, GraphIndex(g), r.ex.features, reviews);
  if (out_dir) {
    fs::create_directories(*out_dir);
    save_run_config(r.rc, fs::path(*out_dir) / "run.cfg");
    write_predictions(g, reviews, probs, fs::path(*out_dir) / "predictions.csv");
  }
  for (std::size_t i = 0; i < reviews.size(); ++i) {
    fmt::print("{}\t{}\t{:.6f}\n", g.review_ids[reviews[i]], probs[i] > 0.5 ? "spoiler" : "not_spoiler", probs[i]);
  }
  return 0;
}

// ---- ablate ------------------------------------------------------------------

struct AblateFlags {
  std::vector<std::string> drop_views, drop_subgraphs, edge_fractions;
  std::optional<std::string> view_fusion, subgraph_fusion;
  bool fusion_grid = false;
  std::vector<std::uint64_t> seeds;
};

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s;
}

int cmd_ablate(const RunFlags& flags, const AblateFlags& a) {
  const RunConfig base_rc = flags.resolve();
  std::vector<RunConfig> variants;
  RunConfig full = base_rc;
  full.drop_views = full.drop_subgraphs = full.edge_fractions = "";
  full.view_fusion = full.subgraph_fusion = "attention";
  variants.push_back(full);
  if (a.fusion_grid) {
    for (const char* f : {"max-pool", "mean-pool", "concat"}) {
      RunConfig v = full;
      v.subgraph_fusion = f;
      variants.push_back(v);
    }
    for (const char* f : {"max-pool", "mean-pool", "concat"}) {
      RunConfig v = full;
      v.view_fusion = f;
      variants.push_back(v);
    }
  } else {
    RunConfig v = base_rc;
    if (!a.drop_views.empty()) v.drop_views = join(a.drop_views);
    if (!a.drop_subgraphs.empty()) v.drop_subgraphs = join(a.drop_subgraphs);
    if (!a.edge_fractions.empty()) v.edge_fractions = join(a.edge_fractions);
    if (a.view_fusion) v.view_fusion = *a.view_fusion;
    if (a.subgraph_fusion) v.subgraph_fusion = *a.subgraph_fusion;
    if (variant_name(v) != "full") variants.push_back(v);
  }
  for (const auto& v : variants) v.validate();

  const std::vector<std::uint64_t> seeds = a.seeds.empty() ? std::vector<std::uint64_t>{base_rc.seed} : a.seeds;
  const fs::path out(base_rc.out);
  fs::create_directories(out);
  RunConfig resolved = variants.back();
  save_run_config(resolved, out / "run.cfg");

  const Dataset ds = load_dataset(base_rc.data);
  std::vector<AblationRow> rows;
  for (std::uint64_t seed : seeds) {
    RunConfig seeded = full;
    seeded.seed = seed;
    const BaseData base = prepare(ds, seeded);
    for (RunConfig v : variants) {
      v.seed = seed;
      const RunOutcome res = run_experiment(base, v);
      rows.push_back(ablation_row(v, res));
      fmt::print(stderr, "{} seed {}: test_f1 {:.4f}\n", rows.back().variant, seed, rows.back().test_f1);
    }
  }
  const std::string table = format_ablation(rows);
  write_text(out / "ablation.tsv", table);
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view spoiler detection on heterogeneous review graphs"};
  app.require_subcommand(1);

  GenFlags gen;
  auto* c_gen = app.add_subcommand("gen-synthetic", "write a planted-signal synthetic dataset");
  c_gen->add_option("--out", gen.out, "output directory")->required();
  c_gen->add_option("--config", gen.config, "synthetic.cfg from an earlier run")->check(CLI::ExistingFile);
  c_gen->add_option("--seed", gen.seed, "seed");
  c_gen->add_option("--n-reviews", gen.n_reviews, "number of reviews (500)");
  c_gen->add_option("--n-movies", gen.n_movies, "number of movies (50)");
  c_gen->add_option("--n-users", gen.n_users, "number of users (40)");
  c_gen->add_option("--signal", gen.signal, "signal strengths a,b,c[,d] for user, genre, score, text");

  RunFlags kge_flags;
  std::optional<std::size_t> kge_dim, kge_epochs;
  std::optional<double> kge_margin;
  auto* c_kge = app.add_subcommand("train-kge", "train TransE entity embeddings on a dataset's knowledge base");
  kge_flags.attach(c_kge, true);
  c_kge->get_option("--data")->required();
  c_kge->remove_option(c_kge->get_option("--epochs"));
  c_kge->add_option("--dim", kge_dim, "embedding dimension (128)");
  c_kge->add_option("--margin", kge_margin, "margin (1.0)");
  c_kge->add_option("--epochs", kge_epochs, "TransE epochs (1000)");

  RunFlags train_flags;
  bool quiet = false;
  auto* c_train = app.add_subcommand("train", "train a model and write checkpoint, history and metrics");
  train_flags.attach(c_train, false);
  c_train->add_flag("--quiet", quiet, "no per-epoch progress");

  std::string ckpt, split = "test";
  std::optional<std::string> eval_data, eval_out;
  auto* c_eval = app.add_subcommand("evaluate", "score a checkpoint on one split");
  c_eval->add_option("--checkpoint", ckpt, "model.ckpt written by train")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--data", eval_data, "dataset directory (defaults to the one in the checkpoint)");
  c_eval->add_option("--split", split, "train, valid or test");
  c_eval->add_option("--out", eval_out, "output directory");

  std::vector<std::string> review_ids;
  auto* c_pred = app.add_subcommand("predict", "spoiler probabilities for reviews");
  c_pred->add_option("--checkpoint", ckpt, "model.ckpt written by train")->required()->check(CLI::ExistingFile);
  c_pred->add_option("--data", eval_data, "dataset directory (defaults to the one in the checkpoint)");
  c_pred->add_option("--review", review_ids, "review id, repeatable (default: all)");
  c_pred->add_option("--out", eval_out, "output directory");

  RunFlags abl_flags;
  AblateFlags abl;
  auto* c_abl = app.add_subcommand("ablate", "train the full model and variants, write a comparison table");
  abl_flags.attach(c_abl, true);
  c_abl->add_option("--drop-view", abl.drop_views, "semantic, meta or knowledge, repeatable");
  c_abl->add_option("--drop-subgraph", abl.drop_subgraphs, "K, M or U, repeatable");
  c_abl->add_option("--edge-fraction", abl.edge_fractions, "S:f removes fraction f of subgraph S's edges");
  c_abl->add_option("--view-fusion", abl.view_fusion, "attention, max, mean or concat");
  c_abl->add_option("--subgraph-fusion", abl.subgraph_fusion, "attention, max, mean or concat");
  c_abl->add_flag("--fusion-grid", abl.fusion_grid, "run the six single-stage pooling replacements");
  c_abl->add_option("--seeds", abl.seeds, "seeds to average over (default: --seed)")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (c_gen->parsed()) return cmd_gen(gen);
    if (c_kge->parsed()) return cmd_train_kge(kge_flags, kge_dim, kge_margin, kge_epochs);
    if (c_train->parsed()) return cmd_train(train_flags, quiet);
    if (c_eval->parsed()) return cmd_evaluate(ckpt, eval_data, split, eval_out);
    if (c_pred->parsed()) return cmd_predict(ckpt, eval_data, review_ids, eval_out);
    if (c_abl->parsed()) return cmd_ablate(abl_flags, abl);
  } catch (const RuntimeFailure& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitRuntime;
  } catch (const std::invalid_argument& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitValidation;
  } catch (const std::out_of_range& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitValidation;
  } catch (const DataError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitRuntime;
  }
  return kExitValidation;
}
