#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mvsd/kge.hpp"
#include "mvsd/model.hpp"
#include "mvsd/training.hpp"

namespace mvsd {

/// Every knob of a run. Serialized as `key=value` lines in a fixed order;
/// `#` starts a comment. Defaults follow the reference hyperparameters.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string data;
  std::string kge;         // entity embedding file; empty trains TransE on the data's KB
  std::string embeddings;  // precomputed text embeddings; empty uses hashing
  std::string out;

  std::size_t input_dim = 768;
  std::size_t hidden = 128;
  std::size_t layers = 2;
  std::size_t classifier_hidden = 64;
  double dropout = 0.3;
  std::size_t epochs = 120;
  std::size_t batch_size = 1024;
  std::size_t fanout = 10;
  bool sample = true;
  std::string optimizer = "AdamW";
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
  std::size_t patience = 5;
  double lr_factor = 0.1;

  std::size_t kge_dim = 128;
  double kge_margin = 1.0;
  std::size_t kge_epochs = 1000;
  std::size_t kge_batch = 128;
  double kge_lr = 0.01;
  int kge_norm = 2;

  double split_train = 0.7;
  double split_valid = 0.2;
  double split_test = 0.1;

  std::string view_fusion = "attention";
  std::string subgraph_fusion = "attention";
  bool per_node_attention = false;
  std::string drop_views;      // comma list of semantic/meta/knowledge
  std::string drop_subgraphs;  // comma list of K/M/U
  std::string edge_fractions;  // comma list of S:f, e.g. U:0.5

  /// Sets one key from its text form; throws std::invalid_argument on an
  /// unknown key or a malformed value.
  void set(std::string_view key, std::string_view value);
  std::string to_text() const;
  /// Checks value ranges and cross-field consistency.
  void validate() const;

  MvsdConfig model_config() const;
  TrainConfig train_config() const;
  KgeConfig kge_config() const;
  std::set<ViewId> dropped_views() const;
  std::set<SubgraphId> dropped_subgraphs() const;
  std::vector<std::pair<SubgraphId, double>> edge_removals() const;
};

/// Parses `key=value` lines on top of the defaults.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& file);
void save_run_config(const RunConfig& rc, const std::filesystem::path& file);

/// Module seeds: derive_seed(seed, name) with fixed names per stage.
std::uint64_t stage_seed(const RunConfig& rc, std::string_view stage);

}  // namespace mvsd
