#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvsd/autograd.hpp"
#include "mvsd/records.hpp"

namespace mvsd {

/// K: knowledge subgraph, M: movie-review subgraph, U: user-review subgraph.
enum class SubgraphId : std::uint8_t { K = 0, M = 1, U = 2 };
inline constexpr std::array<SubgraphId, 3> kSubgraphs = {SubgraphId::K, SubgraphId::M, SubgraphId::U};
inline constexpr std::size_t index_of(SubgraphId s) { return static_cast<std::size_t>(s); }
std::string_view subgraph_name(SubgraphId s);
/// Accepts "K", "M", "U" (case-insensitive); throws std::invalid_argument otherwise.
SubgraphId parse_subgraph(std::string_view name);

enum class NodeType : std::uint8_t { Movie, Review, Rating, User, Year, Genre, Cast };
std::string_view node_type_name(NodeType t);

/// The ten logical edge types. Each belongs to one subgraph.
enum class Relation : std::uint8_t {
  ReviewMovie,   // R1 (M)
  MovieRating,   // R2 (M)
  RatingReview,  // R3 (M), stored review -> rating
  ReviewUser,    // R4 (U)
  ReviewYear,    // R5 (U)
  UserYear,      // R6 (U)
  MovieGenre,    // R7 (K)
  MovieCast,     // R8 (K)
  MovieYear,     // R9 (K)
  MovieRatingK,  // R10 (K)
};
inline constexpr std::size_t kNumRelations = 10;
/// Every logical relation is materialized in both directions.
inline constexpr std::size_t kNumDirectedRelations = 2 * kNumRelations;

struct RelationInfo {
  NodeType src;
  NodeType dst;
  SubgraphId subgraph;
  std::string_view name;
};

const RelationInfo& relation_info(Relation r);
std::span<const Relation> relations_of(SubgraphId s);

/// Directed relation index: 2*relation for src->dst messages, 2*relation+1 for
/// the reverse direction.
inline constexpr std::size_t directed_index(Relation r, bool reverse) {
  return 2 * static_cast<std::size_t>(r) + (reverse ? 1 : 0);
}
std::string directed_name(std::size_t directed);

enum class Split : std::uint8_t { Train = 0, Valid = 1, Test = 2 };
std::string_view split_name(Split s);

struct Edge {
  std::uint32_t src;
  std::uint32_t dst;
  bool operator==(const Edge&) const = default;
};

inline constexpr std::uint32_t kNoNode = std::numeric_limits<std::uint32_t>::max();

struct SubgraphData {
  std::vector<NodeType> types;
  std::vector<std::string> ids;  // external ids, unique within the subgraph
  std::array<std::vector<Edge>, kNumRelations> edges;  // only this subgraph's relations are non-empty

  std::size_t node_count() const { return types.size(); }
  std::size_t edge_count() const;
  std::uint32_t add_node(NodeType t, std::string id);
};

/// Three typed subgraphs plus the bridge registry tying shared movie and
/// review nodes together.
///
/// Movies and reviews have graph-wide ordinals. `movie_local[K][m]` is movie
/// m's node index in K, `review_local[M][r]` review r's index in M, and so on;
/// kNoNode marks a subgraph that does not hold that node (dropped subgraphs,
/// and the subgraph a bridge type never lives in).
struct HeteroGraph {
  std::array<SubgraphData, 3> sub;
  std::array<bool, 3> active{true, true, true};

  std::vector<std::string> movie_ids;
  std::array<std::vector<std::uint32_t>, 3> movie_local;

  std::vector<std::string> review_ids;
  std::array<std::vector<std::uint32_t>, 3> review_local;
  std::vector<int> labels;        // 1 = spoiler
  std::vector<Split> splits;

  SubgraphData& operator[](SubgraphId s) { return sub[index_of(s)]; }
  const SubgraphData& operator[](SubgraphId s) const { return sub[index_of(s)]; }
  bool is_active(SubgraphId s) const { return active[index_of(s)]; }
  std::size_t movie_count() const { return movie_ids.size(); }
  std::size_t review_count() const { return review_ids.size(); }

  /// Local rows of the review ordinals in `s`.
  std::vector<std::uint32_t> review_rows(SubgraphId s) const;
  std::vector<std::uint32_t> movie_rows(SubgraphId s) const;
  std::vector<std::uint32_t> reviews_in(Split part) const;
};

/// Structural invariants every graph must satisfy: edge endpoint types match
/// their relation, indices are in range, and the bridge registry is a
/// bijection between the copies of each shared node. Throws std::logic_error.
void validate_graph(const HeteroGraph& g);

/// Additional degree rules of a freshly built graph (one R1/R3/R4/R5 per
/// review, one R2/R9/R10 and >=1 R7 per movie, one R6 per user).
void validate_construction(const HeteroGraph& g);

/// Movie overall rating rounded half-up to an integer and clamped to 1..10.
int rating_bucket(double rating);

/// Builds the three subgraphs from validated records. Every review gets a
/// label; splits default to Train until assigned.
HeteroGraph build_graph(const Dataset& ds);

/// Removes floor(fraction * E) uniformly chosen logical edges of one subgraph.
/// Nodes are never removed.
HeteroGraph ablate_edges(const HeteroGraph& g, SubgraphId s, double fraction, std::uint64_t seed);

/// Deactivates the named subgraphs: their edges and exclusive nodes go away,
/// movies and reviews stay in the remaining subgraphs. Review labels are always
/// kept, so at least one of M and U must survive.
HeteroGraph drop_subgraphs(const HeteroGraph& g, const std::set<SubgraphId>& drop);

/// Per-subgraph adjacency for message passing. For directed relation dr and
/// node i, neighbors(dr, i) lists the nodes that send messages to i along dr.
class NeighborIndex {
 public:
  NeighborIndex() = default;
  NeighborIndex(const HeteroGraph& g, SubgraphId s);

  std::size_t node_count() const { return n_; }
  std::span<const std::uint32_t> neighbors(std::size_t directed, std::uint32_t node) const;
  std::size_t degree(std::size_t directed, std::uint32_t node) const;
  /// Mean-aggregation operator of one directed relation (weights 1/|N_r(i)|).
  const SparseRows& mean_operator(std::size_t directed) const { return mean_[directed]; }
  /// Directed relations that belong to this subgraph's schema.
  const std::vector<std::size_t>& directed_relations() const { return directed_; }

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> directed_;
  std::array<SparseRows, kNumDirectedRelations> mean_;
};

struct GraphIndex {
  explicit GraphIndex(const HeteroGraph& g);
  std::array<NeighborIndex, 3> sub;
  const NeighborIndex& operator[](SubgraphId s) const { return sub[index_of(s)]; }
};

/// Result of layered neighbor sampling: an induced graph plus the maps back
/// into the source graph.
struct SampledGraph {
  HeteroGraph graph;
  std::array<std::vector<std::uint32_t>, 3> node_origin;  // sampled local -> source local
  std::vector<std::uint32_t> review_origin;               // sampled review ordinal -> source ordinal
  std::vector<std::uint32_t> movie_origin;
  std::vector<std::uint32_t> seeds;                       // seed reviews as sampled ordinals
};

/// Starting from the seed reviews (in every subgraph holding them), each hop
/// keeps at most `fanout` uniformly chosen neighbors per (node, directed
/// relation). A sampled movie or review pulls in its copy in the bridged
/// subgraph. The result is the subgraph induced by all sampled nodes.
SampledGraph sample_neighborhood(const HeteroGraph& g, std::span<const std::uint32_t> seed_reviews,
                                 std::size_t fanout, std::size_t layers, std::uint64_t seed);
/// Same, reusing a prebuilt index of `g`.
SampledGraph sample_neighborhood(const HeteroGraph& g, const GraphIndex& index,
                                 std::span<const std::uint32_t> seed_reviews, std::size_t fanout,
                                 std::size_t layers, std::uint64_t seed);

}  // namespace mvsd
