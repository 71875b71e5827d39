#include <algorithm>
#include <stdexcept>
#include <string>

#include "mvsd/graph.hpp"
#include "mvsd/rng.hpp"

namespace mvsd {

namespace {

struct Frontier {
  std::array<std::vector<char>, 3> in;    // per source node: already sampled
  std::array<std::vector<std::uint32_t>, 3> next;

  bool add(SubgraphId s, std::uint32_t node) {
    auto& flag = in[index_of(s)][node];
    if (flag) return false;
    flag = 1;
    next[index_of(s)].push_back(node);
    return true;
  }
};

// The bridge partner of a movie or review node, if its subgraph pair is active.
void add_with_copies(const HeteroGraph& g, const std::array<std::vector<std::uint32_t>, 3>& movie_of,
                     const std::array<std::vector<std::uint32_t>, 3>& review_of, Frontier& f, SubgraphId s,
                     std::uint32_t node) {
  if (!f.add(s, node)) return;
  const NodeType t = g[s].types[node];
  if (t == NodeType::Movie) {
    const std::uint32_t m = movie_of[index_of(s)][node];
    for (SubgraphId o : kSubgraphs)
      if (g.movie_local[index_of(o)][m] != kNoNode) f.add(o, g.movie_local[index_of(o)][m]);
  } else if (t == NodeType::Review) {
    const std::uint32_t r = review_of[index_of(s)][node];
    for (SubgraphId o : kSubgraphs)
      if (g.review_local[index_of(o)][r] != kNoNode) f.add(o, g.review_local[index_of(o)][r]);
  }
}

}  // namespace

SampledGraph sample_neighborhood(const HeteroGraph& g, std::span<const std::uint32_t> seed_reviews,
                                 std::size_t fanout, std::size_t layers, std::uint64_t seed) {
  return sample_neighborhood(g, GraphIndex(g), seed_reviews, fanout, layers, seed);
}

SampledGraph sample_neighborhood(const HeteroGraph& g, const GraphIndex& index,
                                 std::span<const std::uint32_t> seed_reviews, std::size_t fanout,
                                 std::size_t layers, std::uint64_t seed) {
  if (fanout < 1) throw std::invalid_argument("fanout must be at least 1");
  if (layers < 1) throw std::invalid_argument("layers must be at least 1");
  for (auto r : seed_reviews)
    if (r >= g.review_count()) {
      throw std::out_of_range("seed review " + std::to_string(r) + " out of range (" +
                              std::to_string(g.review_count()) + " reviews)");
    }

  // Inverse registries: local node -> ordinal.
  std::array<std::vector<std::uint32_t>, 3> movie_of, review_of;
  for (SubgraphId s : kSubgraphs) {
    const auto si = index_of(s);
    movie_of[si].assign(g[s].node_count(), kNoNode);
    review_of[si].assign(g[s].node_count(), kNoNode);
    for (std::uint32_t m = 0; m < g.movie_count(); ++m)
      if (g.movie_local[si][m] != kNoNode) movie_of[si][g.movie_local[si][m]] = m;
    for (std::uint32_t r = 0; r < g.review_count(); ++r)
      if (g.review_local[si][r] != kNoNode) review_of[si][g.review_local[si][r]] = r;
  }

  Frontier f;
  for (SubgraphId s : kSubgraphs) f.in[index_of(s)].assign(g[s].node_count(), 0);
  for (auto r : seed_reviews)
    for (SubgraphId s : kSubgraphs)
      if (g.review_local[index_of(s)][r] != kNoNode) add_with_copies(g, movie_of, review_of, f, s, g.review_local[index_of(s)][r]);

  Rng rng(seed);
  std::vector<std::uint32_t> pool;
  for (std::size_t hop = 0; hop < layers; ++hop) {
    std::array<std::vector<std::uint32_t>, 3> current;
    for (SubgraphId s : kSubgraphs) {
      current[index_of(s)] = std::move(f.next[index_of(s)]);
      f.next[index_of(s)].clear();
      std::sort(current[index_of(s)].begin(), current[index_of(s)].end());
    }
    for (SubgraphId s : kSubgraphs) {
      const auto& nbr = index[s];
      for (std::uint32_t node : current[index_of(s)]) {
        for (std::size_t dr : nbr.directed_relations()) {
          const auto all = nbr.neighbors(dr, node);
          if (all.size() <= fanout) {
            for (auto j : all) add_with_copies(g, movie_of, review_of, f, s, j);
            continue;
          }
          pool.assign(all.begin(), all.end());
          for (std::size_t i = 0; i < fanout; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(pool.size() - i));
            std::swap(pool[i], pool[j]);
          }
          for (std::size_t i = 0; i < fanout; ++i) add_with_copies(g, movie_of, review_of, f, s, pool[i]);
        }
      }
    }
  }

  SampledGraph out;
  HeteroGraph& h = out.graph;
  h.active = g.active;
  std::array<std::vector<std::uint32_t>, 3> new_local;
  for (SubgraphId s : kSubgraphs) {
    const auto si = index_of(s);
    auto& origin = out.node_origin[si];
    for (std::uint32_t i = 0; i < g[s].node_count(); ++i)
      if (f.in[si][i]) origin.push_back(i);
    new_local[si].assign(g[s].node_count(), kNoNode);
    for (std::uint32_t k = 0; k < origin.size(); ++k) {
      new_local[si][origin[k]] = k;
      h[s].add_node(g[s].types[origin[k]], g[s].ids[origin[k]]);
    }
    for (std::size_t r = 0; r < kNumRelations; ++r) {
      for (const Edge& e : g[s].edges[r]) {
        const auto a = new_local[si][e.src], b = new_local[si][e.dst];
        if (a != kNoNode && b != kNoNode) h[s].edges[r].push_back(Edge{a, b});
      }
    }
  }

  std::vector<std::uint32_t> review_new(g.review_count(), kNoNode);
  for (std::uint32_t m = 0; m < g.movie_count(); ++m) {
    bool present = false;
    for (SubgraphId s : kSubgraphs) {
      const auto loc = g.movie_local[index_of(s)][m];
      present = present || (loc != kNoNode && f.in[index_of(s)][loc]);
    }
    if (!present) continue;
    out.movie_origin.push_back(m);
    h.movie_ids.push_back(g.movie_ids[m]);
    for (SubgraphId s : kSubgraphs) {
      const auto loc = g.movie_local[index_of(s)][m];
      h.movie_local[index_of(s)].push_back(loc == kNoNode ? kNoNode : new_local[index_of(s)][loc]);
    }
  }
  for (std::uint32_t r = 0; r < g.review_count(); ++r) {
    bool present = false;
    for (SubgraphId s : kSubgraphs) {
      const auto loc = g.review_local[index_of(s)][r];
      present = present || (loc != kNoNode && f.in[index_of(s)][loc]);
    }
    if (!present) continue;
    review_new[r] = static_cast<std::uint32_t>(out.review_origin.size());
    out.review_origin.push_back(r);
    h.review_ids.push_back(g.review_ids[r]);
    h.labels.push_back(g.labels[r]);
    h.splits.push_back(g.splits[r]);
    for (SubgraphId s : kSubgraphs) {
      const auto loc = g.review_local[index_of(s)][r];
      h.review_local[index_of(s)].push_back(loc == kNoNode ? kNoNode : new_local[index_of(s)][loc]);
    }
  }
  for (auto r : seed_reviews) out.seeds.push_back(review_new[r]);
  return out;
}

}  // namespace mvsd
