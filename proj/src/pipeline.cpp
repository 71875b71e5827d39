#include "mvsd/pipeline.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "mvsd/rng.hpp"

namespace mvsd {

BaseData prepare(const Dataset& ds, const RunConfig& rc, std::vector<double>* kge_loss) {
  rc.validate();
  BaseData base;
  base.graph = build_graph(ds);
  base.graph.splits = make_split(base.graph.review_count(), rc.split_train, rc.split_valid, rc.split_test,
                                 stage_seed(rc, "split"));

  const auto texts = node_texts(ds);
  if (rc.embeddings.empty()) {
    semantic_view(base.graph, texts, HashingEmbedder(rc.input_dim), base.features);
  } else {
    const auto embedder = PrecomputedEmbedder::from_file(rc.embeddings);
    if (embedder.dim() != rc.input_dim) {
      throw ShapeError(fmt::format("embedding file has width {}, config expects input_dim {}", embedder.dim(),
                                   rc.input_dim));
    }
    semantic_view(base.graph, texts, embedder, base.features);
  }
  base.meta_stats = meta_view(base.graph, node_metadata(ds), base.features);

  if (rc.kge == "none") {
    zero_knowledge_view(base.graph, rc.kge_dim, base.features);
  } else {
    if (rc.kge.empty()) base.kge = train_kge(kb_from_graph(base.graph, ds.casts), rc.kge_config(), kge_loss);
    else base.kge = load_kge_embeddings(rc.kge);
    knowledge_view(base.graph, base.kge, rc.kge_dim, base.features);
  }
  return base;
}

Experiment apply_ablation(const BaseData& base, const RunConfig& rc) {
  Experiment ex{base.graph, base.features};
  const std::uint64_t seed = stage_seed(rc, "ablate");
  for (const auto& [s, fraction] : rc.edge_removals()) {
    ex.graph = ablate_edges(ex.graph, s, fraction, derive_seed(seed, subgraph_name(s)));
  }
  const auto drop = rc.dropped_subgraphs();
  if (!drop.empty()) {
    ex.graph = drop_subgraphs(ex.graph, drop);
    for (SubgraphId s : drop)
      for (std::size_t slot = 0; slot < 2; ++slot) {
        const Tensor& t = ex.features.at(s, slot);
        ex.features.at(s, slot) = Tensor::matrix(0, t.rank() == 2 ? t.cols() : 0);
      }
  }
  return ex;
}

RunOutcome run_experiment(const BaseData& base, const RunConfig& rc,
                          const std::function<void(const HistoryRow&)>& on_epoch) {
  rc.validate();
  const Experiment ex = apply_ablation(base, rc);
  RunOutcome out{MvsdModel(rc.model_config(), stage_seed(rc, "model")), {}, {}, std::nullopt};
  out.result = train(out.model, ex.graph, ex.features, rc.train_config(), on_epoch);
  const GraphIndex index(ex.graph);
  const Split val_part = ex.graph.reviews_in(Split::Valid).empty() ? Split::Train : Split::Valid;
  out.valid = evaluate(out.model, ex.graph, index, ex.features, val_part);
  if (!ex.graph.reviews_in(Split::Test).empty()) {
    out.test = evaluate(out.model, ex.graph, index, ex.features, Split::Test);
  }
  return out;
}

std::string variant_name(const RunConfig& rc) {
  std::vector<std::string> parts;
  for (ViewId v : rc.dropped_views()) parts.push_back("w/o-" + std::string(view_name(v)));
  for (SubgraphId s : rc.dropped_subgraphs()) parts.push_back("w/o-" + std::string(subgraph_name(s)));
  for (const auto& [s, f] : rc.edge_removals()) parts.push_back(fmt::format("{}:{}", subgraph_name(s), f));
  if (rc.view_fusion != "attention") parts.push_back("view-" + rc.view_fusion);
  if (rc.subgraph_fusion != "attention") parts.push_back("subgraph-" + rc.subgraph_fusion);
  if (parts.empty()) return "full";
  std::string name = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) name += "+" + parts[i];
  return name;
}

AblationRow ablation_row(const RunConfig& rc, const RunOutcome& out) {
  AblationRow row;
  row.variant = variant_name(rc);
  row.seed = rc.seed;
  const EvalReport& rep = out.test ? *out.test : out.valid;
  row.test_f1 = rep.f1;
  row.test_auc = rep.auc_defined ? rep.auc : std::nan("");
  row.test_acc = rep.accuracy;
  row.val_f1 = out.result.best_val_f1;
  row.best_epoch = out.result.best_epoch;
  return row;
}

std::string format_ablation(const std::vector<AblationRow>& rows) {
  std::string s = "variant\tseed\ttest_f1\ttest_auc\ttest_acc\tval_f1\tbest_epoch\n";
  for (const auto& r : rows) {
    s += fmt::format("{}\t{}\t{:.6f}\t{:.6f}\t{:.6f}\t{:.6f}\t{}\n", r.variant, r.seed, r.test_f1, r.test_auc,
                     r.test_acc, r.val_f1, r.best_epoch);
  }
  return s;
}

void write_predictions(const HeteroGraph& g, std::span<const std::uint32_t> reviews, std::span<const double> probs,
                       const std::filesystem::path& file) {
  if (reviews.size() != probs.size()) throw std::invalid_argument("one probability per review expected");
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << "review_id,probability,prediction,label,split\n";
  for (std::size_t i = 0; i < reviews.size(); ++i) {
    const std::uint32_t r = reviews[i];
    out << fmt::format("{},{:.17g},{},{},{}\n", g.review_ids.at(r), probs[i], probs[i] > 0.5 ? 1 : 0, g.labels[r],
                       split_name(g.splits[r]));
  }
  if (!out) throw std::runtime_error("write failed for " + file.string());
}

}  // namespace mvsd
