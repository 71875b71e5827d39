#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mvsd/features.hpp"
#include "mvsd/graph.hpp"
#include "mvsd/kge.hpp"
#include "mvsd/metrics.hpp"
#include "mvsd/model.hpp"
#include "mvsd/records.hpp"
#include "mvsd/run_config.hpp"
#include "mvsd/training.hpp"

namespace mvsd {

/// Full graph with split tags and every view computed once; ablations are
/// derived from it.
struct BaseData {
  HeteroGraph graph;
  FeatureTable features;
  KgeModel kge;          // empty when the knowledge view is zeros
  MetaStats meta_stats;
};

/// Builds the graph, tags the split and computes the semantic, meta and
/// knowledge views. rc.kge: empty trains TransE on the data's knowledge base,
/// "none" gives zero features, anything else is an embedding file.
BaseData prepare(const Dataset& ds, const RunConfig& rc, std::vector<double>* kge_loss = nullptr);

/// Graph and features after rc's edge removals and subgraph drops.
struct Experiment {
  HeteroGraph graph;
  FeatureTable features;
};
Experiment apply_ablation(const BaseData& base, const RunConfig& rc);

struct RunOutcome {
  MvsdModel model;
  TrainResult result;
  EvalReport valid;
  std::optional<EvalReport> test;  // absent when the test split is empty
};

/// Trains a model on the ablated graph and evaluates the best checkpoint.
RunOutcome run_experiment(const BaseData& base, const RunConfig& rc,
                          const std::function<void(const HistoryRow&)>& on_epoch = {});

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  double test_f1 = 0.0;
  double test_auc = 0.0;
  double test_acc = 0.0;
  double val_f1 = 0.0;
  std::size_t best_epoch = 0;
};

/// Short name of rc's variant: "full" or e.g. "w/o-meta+w/o-U+U:0.5".
std::string variant_name(const RunConfig& rc);
AblationRow ablation_row(const RunConfig& rc, const RunOutcome& out);
/// TSV with header `variant seed test_f1 test_auc test_acc val_f1 best_epoch`.
std::string format_ablation(const std::vector<AblationRow>& rows);

/// `review_id,probability,prediction,label,split` per review.
void write_predictions(const HeteroGraph& g, std::span<const std::uint32_t> reviews, std::span<const double> probs,
                       const std::filesystem::path& file);

}  // namespace mvsd
