#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mvsd/features.hpp"
#include "mvsd/graph.hpp"
#include "mvsd/metrics.hpp"
#include "mvsd/model.hpp"
#include "mvsd/optim.hpp"

namespace mvsd {

struct TrainConfig {
  std::size_t epochs = 120;
  std::size_t batch_size = 1024;
  std::size_t fanout = 10;
  AdamWConfig optimizer;
  std::size_t patience = 5;
  double lr_factor = 0.1;
  std::uint64_t seed = 0;
  /// Neighborhood sampling for training batches; off trains on the full graph.
  bool sample = true;
};

struct HistoryRow {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_f1 = 0.0;
  double val_auc = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;        // learning rate used during this epoch
};

/// `epoch,train_loss,val_f1,val_auc,val_acc,lr`, one line per row, %.17g.
std::string format_history(const std::vector<HistoryRow>& rows);
void write_history(const std::vector<HistoryRow>& rows, const std::filesystem::path& file);

struct TrainResult {
  std::vector<HistoryRow> history;
  std::size_t best_epoch = 0;
  double best_val_f1 = 0.0;
  std::size_t steps = 0;
};

/// Minibatch training with AdamW and a plateau schedule on validation F1.
/// Leaves `model` holding the weights of the best validation epoch. Throws
/// std::runtime_error on a non-finite loss, naming epoch and batch.
TrainResult train(MvsdModel& model, const HeteroGraph& g, const FeatureTable& feats, const TrainConfig& cfg,
                  const std::function<void(const HistoryRow&)>& on_epoch = {});

/// Full-graph eval-mode scores of the given reviews.
std::vector<double> predict(MvsdModel& model, const HeteroGraph& g, const GraphIndex& index, const FeatureTable& feats,
                            std::span<const std::uint32_t> reviews, double* loss = nullptr);

/// Full-graph evaluation on one split part. Throws if the part is empty.
EvalReport evaluate(MvsdModel& model, const HeteroGraph& g, const GraphIndex& index, const FeatureTable& feats,
                    Split part);
EvalReport evaluate(MvsdModel& model, const HeteroGraph& g, const FeatureTable& feats, Split part);

/// 7:2:1 style partition: seeded shuffle, then contiguous train/valid/test
/// blocks. Valid and test sizes round to nearest; train takes the remainder.
std::vector<Split> make_split(std::size_t n, double train, double valid, double test, std::uint64_t seed);

}  // namespace mvsd
