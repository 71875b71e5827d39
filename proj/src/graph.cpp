#include "mvsd/graph.hpp"

#include "mvsd/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace mvsd {

namespace {

constexpr std::array<RelationInfo, kNumRelations> kRelationTable = {{
    {NodeType::Review, NodeType::Movie, SubgraphId::M, "review_movie"},
    {NodeType::Movie, NodeType::Rating, SubgraphId::M, "movie_rating"},
    {NodeType::Review, NodeType::Rating, SubgraphId::M, "rating_review"},
    {NodeType::Review, NodeType::User, SubgraphId::U, "review_user"},
    {NodeType::Review, NodeType::Year, SubgraphId::U, "review_year"},
    {NodeType::User, NodeType::Year, SubgraphId::U, "user_year"},
    {NodeType::Movie, NodeType::Genre, SubgraphId::K, "movie_genre"},
    {NodeType::Movie, NodeType::Cast, SubgraphId::K, "movie_cast"},
    {NodeType::Movie, NodeType::Year, SubgraphId::K, "movie_year"},
    {NodeType::Movie, NodeType::Rating, SubgraphId::K, "movie_rating_k"},
}};

constexpr std::array<Relation, 4> kKRelations = {Relation::MovieGenre, Relation::MovieCast, Relation::MovieYear,
                                                 Relation::MovieRatingK};
constexpr std::array<Relation, 3> kMRelations = {Relation::ReviewMovie, Relation::MovieRating, Relation::RatingReview};
constexpr std::array<Relation, 3> kURelations = {Relation::ReviewUser, Relation::ReviewYear, Relation::UserYear};

}  // namespace

std::string_view subgraph_name(SubgraphId s) {
  switch (s) {
    case SubgraphId::K: return "K";
    case SubgraphId::M: return "M";
    case SubgraphId::U: return "U";
  }
  throw std::invalid_argument("unknown subgraph id");
}

SubgraphId parse_subgraph(std::string_view name) {
  if (name.size() == 1) {
    switch (std::toupper(static_cast<unsigned char>(name[0]))) {
      case 'K': return SubgraphId::K;
      case 'M': return SubgraphId::M;
      case 'U': return SubgraphId::U;
    }
  }
  throw std::invalid_argument("unknown subgraph id '" + std::string(name) + "' (expected K, M or U)");
}

std::string_view node_type_name(NodeType t) {
  switch (t) {
    case NodeType::Movie: return "movie";
    case NodeType::Review: return "review";
    case NodeType::Rating: return "rating";
    case NodeType::User: return "user";
    case NodeType::Year: return "year";
    case NodeType::Genre: return "genre";
    case NodeType::Cast: return "cast";
  }
  return "?";
}

const RelationInfo& relation_info(Relation r) { return kRelationTable.at(static_cast<std::size_t>(r)); }

std::span<const Relation> relations_of(SubgraphId s) {
  switch (s) {
    case SubgraphId::K: return kKRelations;
    case SubgraphId::M: return kMRelations;
    case SubgraphId::U: return kURelations;
  }
  throw std::invalid_argument("unknown subgraph id");
}

std::string directed_name(std::size_t directed) {
  const auto& info = relation_info(static_cast<Relation>(directed / 2));
  return std::string(info.name) + (directed % 2 ? ".rev" : "");
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "?";
}

std::size_t SubgraphData::edge_count() const {
  std::size_t n = 0;
  for (const auto& e : edges) n += e.size();
  return n;
}

std::uint32_t SubgraphData::add_node(NodeType t, std::string id) {
  types.push_back(t);
  ids.push_back(std::move(id));
  return static_cast<std::uint32_t>(types.size() - 1);
}

std::vector<std::uint32_t> HeteroGraph::review_rows(SubgraphId s) const { return review_local[index_of(s)]; }
std::vector<std::uint32_t> HeteroGraph::movie_rows(SubgraphId s) const { return movie_local[index_of(s)]; }

std::vector<std::uint32_t> HeteroGraph::reviews_in(Split part) const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t r = 0; r < splits.size(); ++r)
    if (splits[r] == part) out.push_back(r);
  return out;
}

// ---- validation -------------------------------------------------------------

namespace {

void check_bridge(const HeteroGraph& g, SubgraphId s, NodeType type, const std::vector<std::uint32_t>& local,
                  std::size_t count) {
  const bool hosts = type == NodeType::Movie ? s != SubgraphId::U : s != SubgraphId::K;
  const auto& sd = g[s];
  if (local.size() != count) throw std::logic_error(fmt::format("bridge registry size mismatch in {}", subgraph_name(s)));
  if (!hosts || !g.is_active(s)) {
    for (auto v : local)
      if (v != kNoNode) throw std::logic_error(fmt::format("subgraph {} cannot hold a {} copy", subgraph_name(s), node_type_name(type)));
    return;
  }
  std::vector<char> seen(sd.node_count(), 0);
  for (auto v : local) {
    if (v >= sd.node_count() || sd.types[v] != type) {
      throw std::logic_error(fmt::format("bridge entry points at a non-{} node in {}", node_type_name(type), subgraph_name(s)));
    }
    if (seen[v]++) throw std::logic_error(fmt::format("bridge registry is not injective in {}", subgraph_name(s)));
  }
  for (std::size_t i = 0; i < sd.node_count(); ++i) {
    if (sd.types[i] == type && !seen[i]) {
      throw std::logic_error(fmt::format("{} node '{}' in {} is missing from the bridge registry", node_type_name(type),
                                         sd.ids[i], subgraph_name(s)));
    }
  }
}

}  // namespace

void validate_graph(const HeteroGraph& g) {
  for (SubgraphId s : kSubgraphs) {
    const auto& sd = g[s];
    if (sd.types.size() != sd.ids.size()) throw std::logic_error("node type/id arrays differ in length");
    for (std::size_t r = 0; r < kNumRelations; ++r) {
      const auto& info = kRelationTable[r];
      const auto& edges = sd.edges[r];
      if (info.subgraph != s && !edges.empty()) {
        throw std::logic_error(fmt::format("relation {} stored in subgraph {}", info.name, subgraph_name(s)));
      }
      for (const Edge& e : edges) {
        if (e.src >= sd.node_count() || e.dst >= sd.node_count()) throw std::logic_error("edge endpoint out of range");
        if (sd.types[e.src] != info.src || sd.types[e.dst] != info.dst) {
          throw std::logic_error(fmt::format("edge {} -> {} violates the {} signature", sd.ids[e.src], sd.ids[e.dst], info.name));
        }
      }
    }
    if (!g.is_active(s) && (sd.node_count() != 0)) throw std::logic_error("inactive subgraph still holds nodes");
    check_bridge(g, s, NodeType::Movie, g.movie_local[index_of(s)], g.movie_count());
    check_bridge(g, s, NodeType::Review, g.review_local[index_of(s)], g.review_count());
  }
  if (g.labels.size() != g.review_count() || g.splits.size() != g.review_count()) {
    throw std::logic_error("labels/splits do not cover every review");
  }
}

void validate_construction(const HeteroGraph& g) {
  validate_graph(g);
  auto out_degree = [&](SubgraphId s, Relation r) {
    std::vector<int> deg(g[s].node_count(), 0);
    for (const Edge& e : g[s].edges[static_cast<std::size_t>(r)]) ++deg[e.src];
    return deg;
  };
  auto require = [&](SubgraphId s, Relation r, NodeType type, int lo, int hi) {
    const auto deg = out_degree(s, r);
    for (std::size_t i = 0; i < deg.size(); ++i) {
      if (g[s].types[i] != type) continue;
      if (deg[i] < lo || (hi >= 0 && deg[i] > hi)) {
        throw std::logic_error(fmt::format("node '{}' has {} {} edges", g[s].ids[i], deg[i], relation_info(r).name));
      }
    }
  };
  if (g.is_active(SubgraphId::M)) {
    require(SubgraphId::M, Relation::ReviewMovie, NodeType::Review, 1, 1);
    require(SubgraphId::M, Relation::RatingReview, NodeType::Review, 1, 1);
    require(SubgraphId::M, Relation::MovieRating, NodeType::Movie, 1, 1);
  }
  if (g.is_active(SubgraphId::U)) {
    require(SubgraphId::U, Relation::ReviewUser, NodeType::Review, 1, 1);
    require(SubgraphId::U, Relation::ReviewYear, NodeType::Review, 1, 1);
    require(SubgraphId::U, Relation::UserYear, NodeType::User, 1, 1);
  }
  if (g.is_active(SubgraphId::K)) {
    require(SubgraphId::K, Relation::MovieYear, NodeType::Movie, 1, 1);
    require(SubgraphId::K, Relation::MovieRatingK, NodeType::Movie, 1, 1);
    require(SubgraphId::K, Relation::MovieGenre, NodeType::Movie, 1, -1);
  }
}

// ---- construction -----------------------------------------------------------

int rating_bucket(double rating) {
  const int r = static_cast<int>(std::floor(rating + 0.5));
  return std::clamp(r, 1, 10);
}

HeteroGraph build_graph(const Dataset& ds) {
  validate_dataset(ds);
  HeteroGraph g;
  auto& K = g[SubgraphId::K];
  auto& M = g[SubgraphId::M];
  auto& U = g[SubgraphId::U];
  auto add_edge = [](SubgraphData& sd, Relation r, std::uint32_t a, std::uint32_t b) {
    sd.edges[static_cast<std::size_t>(r)].push_back(Edge{a, b});
  };

  // Movies lead both K and M so their rows line up with movie ordinals.
  std::unordered_map<std::string, std::uint32_t> movie_ordinal;
  for (const auto& m : ds.movies) {
    movie_ordinal.emplace(m.movie_id, static_cast<std::uint32_t>(g.movie_ids.size()));
    g.movie_ids.push_back(m.movie_id);
    g.movie_local[0].push_back(K.add_node(NodeType::Movie, "movie:" + m.movie_id));
    g.movie_local[1].push_back(M.add_node(NodeType::Movie, "movie:" + m.movie_id));
    g.movie_local[2].push_back(kNoNode);
  }

  // Knowledge subgraph: genres, cast, years, ratings.
  std::map<std::string, std::uint32_t> genre_node;
  std::vector<std::string> genre_order;
  for (const auto& m : ds.movies)
    for (const auto& name : m.genres)
      if (!genre_node.count(name)) {
        genre_node[name] = 0;
        genre_order.push_back(name);
      }
  for (const auto& name : genre_order) genre_node[name] = K.add_node(NodeType::Genre, "genre:" + name);

  std::unordered_map<std::string, std::uint32_t> cast_node;
  for (const auto& c : ds.casts) cast_node[c.person_id] = K.add_node(NodeType::Cast, "cast:" + c.person_id);

  std::set<int> movie_years;
  for (const auto& m : ds.movies) movie_years.insert(m.year);
  std::map<int, std::uint32_t> k_year;
  for (int y : movie_years) k_year[y] = K.add_node(NodeType::Year, "year:" + std::to_string(y));

  std::array<std::uint32_t, 11> k_rating{};
  for (int v = 1; v <= 10; ++v) k_rating[v] = K.add_node(NodeType::Rating, "rating:" + std::to_string(v));

  for (std::size_t i = 0; i < ds.movies.size(); ++i) {
    const auto& m = ds.movies[i];
    const std::uint32_t node = g.movie_local[0][i];
    std::set<std::uint32_t> genres;
    for (const auto& name : m.genres) genres.insert(genre_node.at(name));
    for (std::uint32_t gn : genres) add_edge(K, Relation::MovieGenre, node, gn);
    add_edge(K, Relation::MovieYear, node, k_year.at(m.year));
    add_edge(K, Relation::MovieRatingK, node, k_rating[rating_bucket(m.rating)]);
  }
  std::set<std::pair<std::uint32_t, std::uint32_t>> credited;
  for (const auto& c : ds.casts) {
    for (const auto& cr : c.credits) {
      const std::uint32_t mv = g.movie_local[0][movie_ordinal.at(cr.movie_id)];
      if (credited.emplace(mv, cast_node.at(c.person_id)).second) {
        add_edge(K, Relation::MovieCast, mv, cast_node.at(c.person_id));
      }
    }
  }
  // Edges were appended per credit; sort R8 for a canonical order.
  auto& cast_edges = K.edges[static_cast<std::size_t>(Relation::MovieCast)];
  std::sort(cast_edges.begin(), cast_edges.end(),
            [](const Edge& a, const Edge& b) { return a.src != b.src ? a.src < b.src : a.dst < b.dst; });

  // Movie-review subgraph: reviews then ratings.
  for (const auto& r : ds.reviews) {
    g.review_ids.push_back(r.review_id);
    g.labels.push_back(r.is_spoiler ? 1 : 0);
    g.splits.push_back(Split::Train);
    g.review_local[0].push_back(kNoNode);
    g.review_local[1].push_back(M.add_node(NodeType::Review, "review:" + r.review_id));
  }
  std::array<std::uint32_t, 11> m_rating{};
  for (int v = 1; v <= 10; ++v) m_rating[v] = M.add_node(NodeType::Rating, "rating:" + std::to_string(v));
  for (std::size_t i = 0; i < ds.movies.size(); ++i) {
    add_edge(M, Relation::MovieRating, g.movie_local[1][i], m_rating[rating_bucket(ds.movies[i].rating)]);
  }
  for (std::size_t i = 0; i < ds.reviews.size(); ++i) {
    const auto& r = ds.reviews[i];
    const std::uint32_t node = g.review_local[1][i];
    add_edge(M, Relation::ReviewMovie, node, g.movie_local[1][movie_ordinal.at(r.movie_id)]);
    add_edge(M, Relation::RatingReview, node, m_rating[r.score]);
  }

  // User-review subgraph: reviews, users, years.
  for (std::size_t i = 0; i < ds.reviews.size(); ++i) {
    g.review_local[2].push_back(U.add_node(NodeType::Review, "review:" + ds.reviews[i].review_id));
  }
  std::unordered_map<std::string, std::uint32_t> user_node;
  for (const auto& u : ds.users) user_node[u.user_id] = U.add_node(NodeType::User, "user:" + u.user_id);
  std::set<int> u_years;
  for (const auto& r : ds.reviews) u_years.insert(year_of(r.timestamp));
  for (const auto& u : ds.users) u_years.insert(year_of(u.created_at));
  std::map<int, std::uint32_t> u_year;
  for (int y : u_years) u_year[y] = U.add_node(NodeType::Year, "year:" + std::to_string(y));
  for (std::size_t i = 0; i < ds.reviews.size(); ++i) {
    const auto& r = ds.reviews[i];
    const std::uint32_t node = g.review_local[2][i];
    add_edge(U, Relation::ReviewUser, node, user_node.at(r.user_id));
    add_edge(U, Relation::ReviewYear, node, u_year.at(year_of(r.timestamp)));
  }
  for (const auto& u : ds.users) add_edge(U, Relation::UserYear, user_node.at(u.user_id), u_year.at(year_of(u.created_at)));

  validate_construction(g);
  return g;
}

// ---- ablations --------------------------------------------------------------

HeteroGraph ablate_edges(const HeteroGraph& g, SubgraphId s, double fraction, std::uint64_t seed) {
  if (index_of(s) > 2) throw std::invalid_argument("unknown subgraph id");
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw std::invalid_argument("edge fraction must lie in [0, 1]");
  HeteroGraph out = g;
  auto& sd = out[s];
  std::vector<std::pair<std::size_t, std::size_t>> all;  // (relation, position)
  for (Relation r : relations_of(s)) {
    const auto ri = static_cast<std::size_t>(r);
    for (std::size_t k = 0; k < sd.edges[ri].size(); ++k) all.emplace_back(ri, k);
  }
  // Tolerance absorbs representation error such as 0.29 * 100 = 28.999...
  const auto remove = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(all.size()) + 1e-9));
  Rng rng(seed);
  for (std::size_t i = 0; i < remove; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(all.size() - i));
    std::swap(all[i], all[j]);
  }
  std::array<std::vector<char>, kNumRelations> dead;
  for (std::size_t r = 0; r < kNumRelations; ++r) dead[r].assign(sd.edges[r].size(), 0);
  for (std::size_t i = 0; i < remove; ++i) dead[all[i].first][all[i].second] = 1;
  for (std::size_t r = 0; r < kNumRelations; ++r) {
    std::vector<Edge> kept;
    for (std::size_t k = 0; k < sd.edges[r].size(); ++k)
      if (!dead[r][k]) kept.push_back(sd.edges[r][k]);
    sd.edges[r] = std::move(kept);
  }
  return out;
}

HeteroGraph drop_subgraphs(const HeteroGraph& g, const std::set<SubgraphId>& drop) {
  if (drop.size() >= 3) throw std::invalid_argument("cannot drop all three subgraphs");
  if (drop.count(SubgraphId::M) && drop.count(SubgraphId::U)) {
    throw std::invalid_argument("dropping both M and U would orphan every review from its label");
  }
  HeteroGraph out = g;
  for (SubgraphId s : drop) {
    out[s] = SubgraphData{};
    out.active[index_of(s)] = false;
    std::fill(out.movie_local[index_of(s)].begin(), out.movie_local[index_of(s)].end(), kNoNode);
    std::fill(out.review_local[index_of(s)].begin(), out.review_local[index_of(s)].end(), kNoNode);
  }
  return out;
}

// ---- adjacency --------------------------------------------------------------

NeighborIndex::NeighborIndex(const HeteroGraph& g, SubgraphId s) : n_(g[s].node_count()) {
  const auto& sd = g[s];
  for (std::size_t d = 0; d < kNumDirectedRelations; ++d) {
    auto& op = mean_[d];
    op.n_rows = n_;
    op.n_cols = n_;
    op.offsets.assign(n_ + 1, 0);
  }
  for (Relation r : relations_of(s)) {
    const auto& edges = sd.edges[static_cast<std::size_t>(r)];
    for (bool reverse : {false, true}) {
      const std::size_t d = directed_index(r, reverse);
      directed_.push_back(d);
      auto& op = mean_[d];
      // Forward: dst receives from src. Reverse: src receives from dst.
      for (const Edge& e : edges) ++op.offsets[(reverse ? e.src : e.dst) + 1];
      for (std::size_t i = 0; i < n_; ++i) op.offsets[i + 1] += op.offsets[i];
      op.cols.assign(edges.size(), 0);
      std::vector<std::uint32_t> cursor(op.offsets.begin(), op.offsets.end() - 1);
      for (const Edge& e : edges) {
        const std::uint32_t recv = reverse ? e.src : e.dst;
        const std::uint32_t send = reverse ? e.dst : e.src;
        op.cols[cursor[recv]++] = send;
      }
      op.weights.assign(edges.size(), 0.0);
      for (std::size_t i = 0; i < n_; ++i) {
        const std::uint32_t deg = op.offsets[i + 1] - op.offsets[i];
        for (std::uint32_t k = op.offsets[i]; k < op.offsets[i + 1]; ++k) op.weights[k] = 1.0 / deg;
      }
    }
  }
}

std::span<const std::uint32_t> NeighborIndex::neighbors(std::size_t directed, std::uint32_t node) const {
  const auto& op = mean_.at(directed);
  return {op.cols.data() + op.offsets[node], op.offsets[node + 1] - op.offsets[node]};
}

std::size_t NeighborIndex::degree(std::size_t directed, std::uint32_t node) const {
  const auto& op = mean_.at(directed);
  return op.offsets[node + 1] - op.offsets[node];
}

GraphIndex::GraphIndex(const HeteroGraph& g)
    : sub{NeighborIndex(g, SubgraphId::K), NeighborIndex(g, SubgraphId::M), NeighborIndex(g, SubgraphId::U)} {}

}  // namespace mvsd
