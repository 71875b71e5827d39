#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mvsd/autograd.hpp"
#include "mvsd/features.hpp"
#include "mvsd/graph.hpp"

namespace mvsd {

/// How two [n x d] inputs are merged into one.
enum class Fusion : std::uint8_t { Attention, MaxPool, MeanPool, Concat };
std::string_view fusion_name(Fusion f);
/// Accepts attention, max / max-pool, mean / mean-pool, concat.
Fusion parse_fusion(std::string_view name);

struct MvsdConfig {
  std::size_t semantic_dim = kSemanticDim;
  std::size_t meta_dim = kMetaWidth;
  std::size_t knowledge_dim = 128;
  std::size_t hidden = 128;
  std::size_t layers = 2;
  std::size_t classifier_hidden = 64;
  double dropout = 0.3;
  bool rgcn_bias = false;
  /// Per-node attention weights instead of one scalar pair per subgraph.
  bool per_node_attention = false;
  Fusion view_fusion = Fusion::Attention;
  Fusion subgraph_fusion = Fusion::Attention;
  std::set<ViewId> dropped_views;
  std::set<SubgraphId> dropped_subgraphs;

  std::size_t raw_dim(ViewId v) const;
  bool subgraph_active(SubgraphId s) const { return !dropped_subgraphs.count(s); }
  /// A channel exists when its subgraph is active and its view is kept.
  bool channel_active(SubgraphId s, std::size_t slot) const;
  /// Throws std::invalid_argument when a kept subgraph would have no view or
  /// the sizes are degenerate.
  void validate() const;
};

/// Parameters of one R-GCN channel.
struct RgcnWeights {
  Var self;
  std::array<Var, kNumDirectedRelations> rel;  // only the subgraph's relations are valid
  Var bias;                                     // invalid unless rgcn_bias
};

/// x'_i = x_i Self + sum_r mean_{j in N_r(i)} x_j Rel_r (+ bias).
Var rgcn_forward(const Var& x, const RgcnWeights& w, const NeighborIndex& adj);

/// Weights and output of a two-way fusion. `weights` is 1x2 (scalar mode) or
/// n x 2 (per-node mode) for attention; invalid otherwise.
struct FusionResult {
  Var fused;
  Var weights;
};

struct AttentionWeights {
  Var w;  // d x d
  Var b;  // 1 x d
  Var q;  // d x 1
};

/// Importance score per input: mean over rows of tanh(X W + b) q, softmaxed
/// over the two inputs, then used to mix them.
FusionResult attention_fuse(const Var& a, const Var& b, const AttentionWeights& att, bool per_node);
/// Non-attention fusions. Concat needs `proj` (2d x d) and `proj_bias` (1 x d).
Var pool_fuse(Fusion kind, const Var& a, const Var& b, const Var& proj = {}, const Var& proj_bias = {});

/// Per-layer attention weights observed during a forward pass.
struct LayerTrace {
  std::array<std::vector<std::array<double, 2>>, 3> alpha;  // per subgraph, one pair per row (scalar mode: one)
  std::vector<std::array<double, 2>> beta_movie;            // K vs M
  std::vector<std::array<double, 2>> beta_review;           // M vs U
  std::array<std::array<Tensor, 2>, 3> state;               // channel outputs after writeback
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
  Tensor review_repr;  // final fused review rows, one per review ordinal
};

class MvsdModel {
 public:
  MvsdModel(MvsdConfig cfg, std::uint64_t seed);
  MvsdModel(const MvsdModel& other);
  MvsdModel& operator=(const MvsdModel& other);

  const MvsdConfig& config() const { return cfg_; }
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  Parameter& param(std::string_view name);
  const Parameter* find(std::string_view name) const;
  /// Total number of scalar weights.
  std::size_t weight_count() const;

  /// Logits [reviews.size() x 2] for the given review ordinals of `g` (all
  /// reviews if empty). Dropout is active only when `train`.
  Var forward(Tape& tape, const HeteroGraph& g, const GraphIndex& index, const FeatureTable& feats,
              std::span<const std::uint32_t> reviews, bool train, Rng& rng, ForwardTrace* trace = nullptr);

 private:
  Parameter& add(std::string name, Tensor value);
  void rebuild_index();

  MvsdConfig cfg_;
  std::deque<Parameter> params_;
  std::unordered_map<std::string, Parameter*> by_name_;
};

/// Spoiler probability (softmax class 1) per row of a logits matrix.
std::vector<double> spoiler_probabilities(const Tensor& logits);

}  // namespace mvsd
