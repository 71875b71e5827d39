#include "mvsd/model.hpp"

#include <fmt/format.h>

#include <cmath>
#include <stdexcept>

namespace mvsd {

std::string_view fusion_name(Fusion f) {
  switch (f) {
    case Fusion::Attention: return "attention";
    case Fusion::MaxPool: return "max-pool";
    case Fusion::MeanPool: return "mean-pool";
    case Fusion::Concat: return "concat";
  }
  return "?";
}

Fusion parse_fusion(std::string_view name) {
  if (name == "attention") return Fusion::Attention;
  if (name == "max" || name == "max-pool") return Fusion::MaxPool;
  if (name == "mean" || name == "mean-pool") return Fusion::MeanPool;
  if (name == "concat") return Fusion::Concat;
  throw std::invalid_argument("unknown fusion '" + std::string(name) + "' (expected attention, max-pool, mean-pool or concat)");
}

std::size_t MvsdConfig::raw_dim(ViewId v) const {
  switch (v) {
    case ViewId::Semantic: return semantic_dim;
    case ViewId::Meta: return meta_dim;
    case ViewId::Knowledge: return knowledge_dim;
  }
  return 0;
}

bool MvsdConfig::channel_active(SubgraphId s, std::size_t slot) const {
  return subgraph_active(s) && !dropped_views.count(views_of(s)[slot]);
}

void MvsdConfig::validate() const {
  if (hidden == 0 || layers == 0 || classifier_hidden == 0) throw std::invalid_argument("model sizes must be positive");
  if (semantic_dim == 0 || meta_dim == 0 || knowledge_dim == 0) throw std::invalid_argument("feature widths must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
  if (dropped_subgraphs.size() >= 3) throw std::invalid_argument("cannot drop all three subgraphs");
  if (dropped_subgraphs.count(SubgraphId::M) && dropped_subgraphs.count(SubgraphId::U)) {
    throw std::invalid_argument("dropping both M and U leaves no review nodes");
  }
  for (SubgraphId s : kSubgraphs) {
    if (subgraph_active(s) && !channel_active(s, 0) && !channel_active(s, 1)) {
      throw std::invalid_argument(fmt::format("subgraph {} would have no feature view left", subgraph_name(s)));
    }
  }
}

// ---- building blocks ---------------------------------------------------------

Var rgcn_forward(const Var& x, const RgcnWeights& w, const NeighborIndex& adj) {
  if (x.rows() != adj.node_count()) {
    throw ShapeError(fmt::format("R-GCN input has {} rows but the subgraph has {} nodes", x.rows(), adj.node_count()));
  }
  Var out = matmul(x, w.self);
  for (std::size_t dr : adj.directed_relations()) {
    const SparseRows& op = adj.mean_operator(dr);
    if (op.cols.empty()) continue;  // no edges: the relation contributes nothing
    out = add(out, matmul(aggregate(x, op), w.rel[dr]));
  }
  if (w.bias.valid()) out = add_row(out, w.bias);
  return out;
}

FusionResult attention_fuse(const Var& a, const Var& b, const AttentionWeights& att, bool per_node) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("attention inputs differ in shape: [" + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     "] vs [" + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + "]");
  }
  auto score = [&](const Var& x) {
    const Var h = tanh(add_row(matmul(x, att.w), att.b));
    return per_node ? matmul(h, att.q) : matmul(row_mean(h), att.q);
  };
  const std::array<Var, 2> scores = {score(a), score(b)};
  const Var weights = softmax_rows(concat_cols(scores));
  const Var wa = column(weights, 0);
  const Var wb = column(weights, 1);
  Var fused = per_node ? add(scale_rows(a, wa), scale_rows(b, wb)) : add(scale_by(a, wa), scale_by(b, wb));
  return {fused, weights};
}

Var pool_fuse(Fusion kind, const Var& a, const Var& b, const Var& proj, const Var& proj_bias) {
  switch (kind) {
    case Fusion::MaxPool: return maximum(a, b);
    case Fusion::MeanPool: return scale(add(a, b), 0.5);
    case Fusion::Concat: {
      if (!proj.valid() || !proj_bias.valid()) throw std::logic_error("concat fusion needs a projection");
      const std::array<Var, 2> parts = {a, b};
      return add_row(matmul(concat_cols(parts), proj), proj_bias);
    }
    case Fusion::Attention: break;
  }
  throw std::logic_error("attention fusion goes through attention_fuse");
}

// ---- model ------------------------------------------------------------------

namespace {

std::string channel_name(SubgraphId s, std::size_t slot) {
  return fmt::format("{}.{}", subgraph_name(s), view_name(views_of(s)[slot]));
}

constexpr std::array<std::string_view, 2> kBridgeNames = {"movie", "review"};
// Host subgraphs of each bridge type.
constexpr std::array<std::array<SubgraphId, 2>, 2> kBridgeHosts = {{{SubgraphId::K, SubgraphId::M},
                                                                    {SubgraphId::M, SubgraphId::U}}};

}  // namespace

Parameter& MvsdModel::add(std::string name, Tensor value) {
  params_.emplace_back(std::move(name), std::move(value));
  by_name_[params_.back().name] = &params_.back();
  return params_.back();
}

void MvsdModel::rebuild_index() {
  by_name_.clear();
  for (auto& p : params_) by_name_[p.name] = &p;
}

MvsdModel::MvsdModel(MvsdConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(derive_seed(seed, "model.init"));
  const std::size_t d = cfg_.hidden;
  auto fusion_params = [&](const std::string& prefix, Fusion kind) {
    if (kind == Fusion::Attention) {
      add(prefix + ".att.W", glorot_uniform(d, d, rng));
      add(prefix + ".att.b", Tensor::matrix(1, d));
      add(prefix + ".att.q", glorot_uniform(d, 1, rng));
    } else if (kind == Fusion::Concat) {
      add(prefix + ".cat.weight", glorot_uniform(2 * d, d, rng));
      add(prefix + ".cat.bias", Tensor::matrix(1, d));
    }
  };

  for (SubgraphId s : kSubgraphs)
    for (std::size_t slot = 0; slot < 2; ++slot) {
      if (!cfg_.channel_active(s, slot)) continue;
      const std::size_t in = cfg_.raw_dim(views_of(s)[slot]);
      add("input." + channel_name(s, slot) + ".weight", glorot_uniform(in, d, rng));
      add("input." + channel_name(s, slot) + ".bias", Tensor::matrix(1, d));
    }
  for (std::size_t layer = 0; layer < cfg_.layers; ++layer) {
    const std::string lp = fmt::format("layer{}", layer);
    for (SubgraphId s : kSubgraphs)
      for (std::size_t slot = 0; slot < 2; ++slot) {
        if (!cfg_.channel_active(s, slot)) continue;
        const std::string cp = lp + ".rgcn." + channel_name(s, slot);
        add(cp + ".self", glorot_uniform(d, d, rng));
        for (Relation r : relations_of(s))
          for (bool reverse : {false, true}) add(cp + ".rel." + directed_name(directed_index(r, reverse)), glorot_uniform(d, d, rng));
        if (cfg_.rgcn_bias) add(cp + ".bias", Tensor::matrix(1, d));
      }
    for (SubgraphId s : kSubgraphs)
      if (cfg_.channel_active(s, 0) && cfg_.channel_active(s, 1)) {
        fusion_params(fmt::format("{}.view.{}", lp, subgraph_name(s)), cfg_.view_fusion);
      }
    for (std::size_t bt = 0; bt < 2; ++bt)
      if (cfg_.subgraph_active(kBridgeHosts[bt][0]) && cfg_.subgraph_active(kBridgeHosts[bt][1])) {
        fusion_params(fmt::format("{}.subgraph.{}", lp, kBridgeNames[bt]), cfg_.subgraph_fusion);
      }
  }
  add("classifier.0.weight", glorot_uniform(d, cfg_.classifier_hidden, rng));
  add("classifier.0.bias", Tensor::matrix(1, cfg_.classifier_hidden));
  add("classifier.1.weight", glorot_uniform(cfg_.classifier_hidden, 2, rng));
  add("classifier.1.bias", Tensor::matrix(1, 2));
}

MvsdModel::MvsdModel(const MvsdModel& other) : cfg_(other.cfg_), params_(other.params_) { rebuild_index(); }

MvsdModel& MvsdModel::operator=(const MvsdModel& other) {
  if (this != &other) {
    cfg_ = other.cfg_;
    params_ = other.params_;
    rebuild_index();
  }
  return *this;
}

std::vector<Parameter*> MvsdModel::parameters() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> MvsdModel::parameters() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

Parameter& MvsdModel::param(std::string_view name) {
  const auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) throw std::out_of_range("no parameter named '" + std::string(name) + "'");
  return *it->second;
}

const Parameter* MvsdModel::find(std::string_view name) const {
  const auto it = by_name_.find(std::string(name));
  return it == by_name_.end() ? nullptr : it->second;
}

std::size_t MvsdModel::weight_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

namespace {

std::vector<std::array<double, 2>> weight_pairs(const Var& w) {
  std::vector<std::array<double, 2>> out;
  const Tensor& t = w.value();
  for (std::size_t i = 0; i < t.rows(); ++i) out.push_back({t(i, 0), t(i, 1)});
  return out;
}

}  // namespace

Var MvsdModel::forward(Tape& tape, const HeteroGraph& g, const GraphIndex& index, const FeatureTable& feats,
                       std::span<const std::uint32_t> reviews, bool train, Rng& rng, ForwardTrace* trace) {
  for (SubgraphId s : kSubgraphs) {
    if (g.is_active(s) != cfg_.subgraph_active(s)) {
      throw std::invalid_argument(fmt::format("graph and model disagree on whether subgraph {} is present", subgraph_name(s)));
    }
  }
  if (g.review_count() == 0) throw std::invalid_argument("graph has no review nodes");
  auto P = [&](const std::string& name) { return tape.param(param(name)); };
  auto fusion_vars = [&](const std::string& prefix, Fusion kind, AttentionWeights& att, Var& proj, Var& proj_bias) {
    if (kind == Fusion::Attention) {
      att = {P(prefix + ".att.W"), P(prefix + ".att.b"), P(prefix + ".att.q")};
    } else if (kind == Fusion::Concat) {
      proj = P(prefix + ".cat.weight");
      proj_bias = P(prefix + ".cat.bias");
    }
  };

  // Input encoders.
  std::array<std::array<Var, 2>, 3> x;
  for (SubgraphId s : kSubgraphs)
    for (std::size_t slot = 0; slot < 2; ++slot) {
      if (!cfg_.channel_active(s, slot)) continue;
      const Tensor& raw = feats.at(s, slot);
      const std::size_t want = cfg_.raw_dim(views_of(s)[slot]);
      if (raw.rank() != 2 || raw.rows() != g[s].node_count() || raw.cols() != want) {
        throw ShapeError(fmt::format("features of channel {} are {}, expected [{}x{}]", channel_name(s, slot),
                                     shape_str(raw.shape()), g[s].node_count(), want));
      }
      const std::string pre = "input." + channel_name(s, slot);
      x[index_of(s)][slot] = encode_view(tape.constant(raw), P(pre + ".weight"), P(pre + ".bias"));
    }

  Var review_repr;
  for (std::size_t layer = 0; layer < cfg_.layers; ++layer) {
    const std::string lp = fmt::format("layer{}", layer);
    LayerTrace* lt = nullptr;
    if (trace) lt = &trace->layers.emplace_back();

    // (1) Per-channel relational propagation.
    std::array<std::array<Var, 2>, 3> h;
    for (SubgraphId s : kSubgraphs)
      for (std::size_t slot = 0; slot < 2; ++slot) {
        if (!cfg_.channel_active(s, slot)) continue;
        const std::string cp = lp + ".rgcn." + channel_name(s, slot);
        RgcnWeights w;
        w.self = P(cp + ".self");
        for (std::size_t dr : index[s].directed_relations()) w.rel[dr] = P(cp + ".rel." + directed_name(dr));
        if (cfg_.rgcn_bias) w.bias = P(cp + ".bias");
        Var out = leaky_relu(rgcn_forward(x[index_of(s)][slot], w, index[s]), kLeakySlope);
        h[index_of(s)][slot] = dropout(out, cfg_.dropout, rng, train);
      }

    // (2) View-level fusion per subgraph.
    std::array<Var, 3> fused;
    for (SubgraphId s : kSubgraphs) {
      if (!cfg_.subgraph_active(s)) continue;
      const auto si = index_of(s);
      if (!cfg_.channel_active(s, 0) || !cfg_.channel_active(s, 1)) {
        fused[si] = cfg_.channel_active(s, 0) ? h[si][0] : h[si][1];
        if (lt) {
          const bool first = cfg_.channel_active(s, 0);
          lt->alpha[si].assign(1, std::array<double, 2>{first ? 1.0 : 0.0, first ? 0.0 : 1.0});
        }
        continue;
      }
      AttentionWeights att;
      Var proj, proj_bias;
      fusion_vars(fmt::format("{}.view.{}", lp, subgraph_name(s)), cfg_.view_fusion, att, proj, proj_bias);
      if (cfg_.view_fusion == Fusion::Attention) {
        auto r = attention_fuse(h[si][0], h[si][1], att, cfg_.per_node_attention);
        fused[si] = r.fused;
        if (lt) lt->alpha[si] = weight_pairs(r.weights);
      } else {
        fused[si] = pool_fuse(cfg_.view_fusion, h[si][0], h[si][1], proj, proj_bias);
      }
    }

    // (3) Subgraph-level fusion at bridge nodes, (4) writeback into every channel.
    for (std::size_t bt = 0; bt < 2; ++bt) {
      const auto [sa, sb] = kBridgeHosts[bt];
      const auto& local = bt == 0 ? g.movie_local : g.review_local;
      const bool has_a = cfg_.subgraph_active(sa), has_b = cfg_.subgraph_active(sb);
      Var bridge;
      if (has_a && has_b) {
        const Var xa = gather_rows(fused[index_of(sa)], local[index_of(sa)]);
        const Var xb = gather_rows(fused[index_of(sb)], local[index_of(sb)]);
        AttentionWeights att;
        Var proj, proj_bias;
        fusion_vars(fmt::format("{}.subgraph.{}", lp, kBridgeNames[bt]), cfg_.subgraph_fusion, att, proj, proj_bias);
        if (cfg_.subgraph_fusion == Fusion::Attention) {
          auto r = attention_fuse(xa, xb, att, cfg_.per_node_attention);
          bridge = r.fused;
          if (lt) (bt == 0 ? lt->beta_movie : lt->beta_review) = weight_pairs(r.weights);
        } else {
          bridge = pool_fuse(cfg_.subgraph_fusion, xa, xb, proj, proj_bias);
        }
      } else {
        const SubgraphId only = has_a ? sa : sb;
        bridge = gather_rows(fused[index_of(only)], local[index_of(only)]);
        if (lt) {
          const std::array<double, 2> pair = {has_a ? 1.0 : 0.0, has_a ? 0.0 : 1.0};
          (bt == 0 ? lt->beta_movie : lt->beta_review).assign(1, pair);
        }
      }
      for (SubgraphId s : {sa, sb}) {
        if (!cfg_.subgraph_active(s)) continue;
        for (std::size_t slot = 0; slot < 2; ++slot)
          if (cfg_.channel_active(s, slot)) h[index_of(s)][slot] = overwrite_rows(h[index_of(s)][slot], local[index_of(s)], bridge);
      }
      if (bt == 1) review_repr = bridge;
    }
    x = h;
    if (lt)
      for (SubgraphId s : kSubgraphs)
        for (std::size_t slot = 0; slot < 2; ++slot)
          if (cfg_.channel_active(s, slot)) lt->state[index_of(s)][slot] = x[index_of(s)][slot].value();
  }

  if (trace) trace->review_repr = review_repr.value();
  Var rows = review_repr;
  if (!reviews.empty()) rows = gather_rows(review_repr, reviews);
  Var hidden = leaky_relu(add_row(matmul(rows, P("classifier.0.weight")), P("classifier.0.bias")), kLeakySlope);
  return add_row(matmul(hidden, P("classifier.1.weight")), P("classifier.1.bias"));
}

std::vector<double> spoiler_probabilities(const Tensor& logits) {
  std::vector<double> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) out[i] = softmax2(logits(i, 0), logits(i, 1)).second;
  return out;
}

}  // namespace mvsd
