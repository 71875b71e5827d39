#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "mvsd/graph.hpp"
#include "test_util.hpp"

using namespace mvsd;
using namespace testutil;

TEST_SUITE_BEGIN("graph");

namespace {

std::string node_id(const HeteroGraph& g, SubgraphId s, std::uint32_t i) { return g[s].ids[i]; }

// Brute-force l-hop closure: all neighbors along any relation, bridge copies
// joining the frontier of their own subgraph.
std::array<std::set<std::string>, 3> closure(const HeteroGraph& g, std::span<const std::uint32_t> seeds,
                                             std::size_t layers) {
  std::array<std::set<std::string>, 3> seen;
  std::array<std::vector<std::string>, 3> frontier;
  auto add = [&](SubgraphId s, const std::string& id, auto&& self) -> void {
    if (!seen[index_of(s)].insert(id).second) return;
    frontier[index_of(s)].push_back(id);
    if (id.rfind("movie:", 0) == 0 || id.rfind("review:", 0) == 0) {
      for (SubgraphId o : kSubgraphs) {
        if (!g.is_active(o)) continue;
        const auto& ids = g[o].ids;
        if (std::find(ids.begin(), ids.end(), id) != ids.end()) self(o, id, self);
      }
    }
  };
  for (auto r : seeds)
    for (SubgraphId s : kSubgraphs)
      if (g.review_local[index_of(s)][r] != kNoNode) add(s, node_id(g, s, g.review_local[index_of(s)][r]), add);
  for (std::size_t hop = 0; hop < layers; ++hop) {
    auto current = frontier;
    for (auto& f : frontier) f.clear();
    for (SubgraphId s : kSubgraphs) {
      const std::set<std::string> cur(current[index_of(s)].begin(), current[index_of(s)].end());
      for (const auto& edges : g[s].edges)
        for (const Edge& e : edges) {
          if (cur.count(node_id(g, s, e.src))) add(s, node_id(g, s, e.dst), add);
          if (cur.count(node_id(g, s, e.dst))) add(s, node_id(g, s, e.src), add);
        }
    }
  }
  return seen;
}

}  // namespace

TEST_CASE("single review builds the expected M edges") {
  Dataset ds;
  ds.users = {user("u1", 2010)};
  ds.movies = {movie("m1", 1999, 6.4, {"drama"})};
  ds.reviews = {review("r1", "u1", "m1", 7, 2012, false)};
  const HeteroGraph g = build_graph(ds);
  CHECK(count_edges(g, Relation::ReviewMovie) == 1);
  CHECK(count_edges(g, Relation::MovieRating) == 1);
  CHECK(count_edges(g, Relation::RatingReview) == 1);
  const auto& M = g[SubgraphId::M];
  const Edge r2 = M.edges[static_cast<std::size_t>(Relation::MovieRating)][0];
  CHECK(M.ids[r2.src] == "movie:m1");
  CHECK(M.ids[r2.dst] == "rating:6");
  const Edge r3 = M.edges[static_cast<std::size_t>(Relation::RatingReview)][0];
  CHECK(M.ids[r3.src] == "review:r1");
  CHECK(M.ids[r3.dst] == "rating:7");
  CHECK_NOTHROW(validate_graph(g));
  CHECK_NOTHROW(validate_construction(g));
}

TEST_CASE("movie metadata builds the expected K edges") {
  Dataset ds;
  ds.movies = {movie("m1", 1994, 9.0, {"drama", "comedy"})};
  ds.casts = {cast("p1", {{"m1", "director"}}), cast("p2", {{"m1", "actor"}}), cast("p3", {{"m1", "writer"}})};
  const HeteroGraph g = build_graph(ds);
  CHECK(count_edges(g, Relation::MovieGenre) == 2);
  CHECK(count_edges(g, Relation::MovieCast) == 3);
  CHECK(count_edges(g, Relation::MovieYear) == 1);
  CHECK(count_edges(g, Relation::MovieRatingK) == 1);
  CHECK(g.review_count() == 0);
  CHECK_NOTHROW(validate_graph(g));
}

TEST_CASE("empty review list gives a valid graph without review nodes") {
  Dataset ds;
  ds.users = {user("u1", 2010)};
  ds.movies = {movie("m1", 1999, 5.0, {"drama"})};
  const HeteroGraph g = build_graph(ds);
  CHECK(g.review_count() == 0);
  for (SubgraphId s : kSubgraphs)
    for (auto t : g[s].types) CHECK(t != NodeType::Review);
  CHECK_NOTHROW(validate_graph(g));
}

TEST_CASE("rating and year nodes: ten ratings per rating-holding subgraph, copies not shared") {
  const HeteroGraph g = build_graph(tiny_dataset());
  for (SubgraphId s : {SubgraphId::K, SubgraphId::M}) {
    std::set<std::string> ratings;
    for (std::size_t i = 0; i < g[s].node_count(); ++i)
      if (g[s].types[i] == NodeType::Rating) ratings.insert(g[s].ids[i]);
    CHECK(ratings.size() == 10);
    CHECK(ratings.count("rating:1"));
    CHECK(ratings.count("rating:10"));
  }
  for (std::size_t i = 0; i < g[SubgraphId::U].node_count(); ++i) CHECK(g[SubgraphId::U].types[i] != NodeType::Rating);
  // Movie 2 is rated 8.5: half-up rounding gives 9.
  const auto& K = g[SubgraphId::K];
  bool found = false;
  for (const Edge& e : K.edges[static_cast<std::size_t>(Relation::MovieRatingK)])
    if (K.ids[e.src] == "movie:m2") {
      CHECK(K.ids[e.dst] == "rating:9");
      found = true;
    }
  CHECK(found);
  CHECK(rating_bucket(8.5) == 9);
  CHECK(rating_bucket(6.49) == 6);
  CHECK(rating_bucket(0.2) == 1);
}

TEST_CASE("construction degree rules hold on random datasets") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const HeteroGraph g = build_graph(random_dataset(seed, 5, 6, 25, 4));
    CHECK_NOTHROW(validate_graph(g));
    CHECK_NOTHROW(validate_construction(g));
    CHECK(count_edges(g, Relation::ReviewMovie) == 25);
    CHECK(count_edges(g, Relation::RatingReview) == 25);
    CHECK(count_edges(g, Relation::ReviewUser) == 25);
    CHECK(count_edges(g, Relation::ReviewYear) == 25);
    CHECK(count_edges(g, Relation::MovieRating) == 6);
    CHECK(count_edges(g, Relation::MovieYear) == 6);
    CHECK(count_edges(g, Relation::MovieRatingK) == 6);
    CHECK(count_edges(g, Relation::UserYear) == 5);
  }
}

TEST_CASE("build_graph rejects dangling references and bad scores") {
  Dataset ds = tiny_dataset();
  ds.reviews[0].movie_id = "nope";
  try {
    build_graph(ds);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("nope") != std::string::npos);
  }
  ds = tiny_dataset();
  ds.reviews[1].score = 11;
  CHECK_THROWS_AS(build_graph(ds), DataError);
}

TEST_CASE("bridge registry is a bijection") {
  const HeteroGraph g = build_graph(tiny_dataset());
  for (std::size_t m = 0; m < g.movie_count(); ++m) {
    const auto k = g.movie_local[index_of(SubgraphId::K)][m];
    const auto mm = g.movie_local[index_of(SubgraphId::M)][m];
    REQUIRE(k != kNoNode);
    REQUIRE(mm != kNoNode);
    CHECK(g[SubgraphId::K].ids[k] == g[SubgraphId::M].ids[mm]);
    CHECK(g.movie_local[index_of(SubgraphId::U)][m] == kNoNode);
  }
  for (std::size_t r = 0; r < g.review_count(); ++r) {
    const auto a = g.review_local[index_of(SubgraphId::M)][r];
    const auto b = g.review_local[index_of(SubgraphId::U)][r];
    CHECK(g[SubgraphId::M].ids[a] == g[SubgraphId::U].ids[b]);
  }
  HeteroGraph broken = g;
  broken.movie_local[index_of(SubgraphId::M)][0] = broken.movie_local[index_of(SubgraphId::M)][1];
  CHECK_THROWS_AS(validate_graph(broken), std::logic_error);
}

TEST_CASE("neighbor index degrees equal materialized edges") {
  const HeteroGraph g = build_graph(random_dataset(3, 6, 8, 40, 5));
  const GraphIndex idx(g);
  for (SubgraphId s : kSubgraphs) {
    const auto& nb = idx[s];
    for (std::size_t r = 0; r < kNumRelations; ++r) {
      std::map<std::uint32_t, std::size_t> fwd, rev;
      for (const Edge& e : g[s].edges[r]) {
        ++fwd[e.dst];
        ++rev[e.src];
      }
      for (std::uint32_t i = 0; i < g[s].node_count(); ++i) {
        const bool in_schema = relation_info(static_cast<Relation>(r)).subgraph == s;
        if (!in_schema) continue;
        CHECK(nb.degree(2 * r, i) == fwd[i]);
        CHECK(nb.degree(2 * r + 1, i) == rev[i]);
        const auto& op = nb.mean_operator(2 * r);
        double wsum = 0;
        for (auto k = op.offsets[i]; k < op.offsets[i + 1]; ++k) wsum += op.weights[k];
        CHECK(wsum == doctest::Approx(fwd[i] ? 1.0 : 0.0));
      }
    }
  }
}

TEST_CASE("ablate_edges examples") {
  Dataset ds;
  ds.movies = {movie("m1", 1994, 9.0, {"drama", "comedy"})};
  for (int k = 0; k < 6; ++k) ds.casts.push_back(cast("p" + std::to_string(k), {{"m1", "actor"}}));
  const HeteroGraph g = build_graph(ds);
  REQUIRE(g[SubgraphId::K].edge_count() == 10);

  const HeteroGraph same = ablate_edges(g, SubgraphId::K, 0.0, 1);
  CHECK(edge_set(same, SubgraphId::K) == edge_set(g, SubgraphId::K));

  const HeteroGraph none = ablate_edges(g, SubgraphId::K, 1.0, 1);
  CHECK(none[SubgraphId::K].edge_count() == 0);
  CHECK(none[SubgraphId::K].node_count() == g[SubgraphId::K].node_count());

  const HeteroGraph half = ablate_edges(g, SubgraphId::K, 0.5, 1);
  CHECK(half[SubgraphId::K].edge_count() == 5);
  const HeteroGraph half2 = ablate_edges(g, SubgraphId::K, 0.5, 1);
  CHECK(edge_set(half, SubgraphId::K) == edge_set(half2, SubgraphId::K));
  CHECK_THROWS_AS(ablate_edges(g, SubgraphId::K, 1.5, 1), std::invalid_argument);
}

TEST_CASE("ablate_edges removes floor(f E) edges, keeps nodes and bridges") {
  const HeteroGraph g = build_graph(random_dataset(9, 5, 7, 33, 4));
  for (SubgraphId s : kSubgraphs)
    for (double f : {0.2, 0.4, 0.6, 0.8}) {
      const HeteroGraph a = ablate_edges(g, s, f, 77);
      const auto E = g[s].edge_count();
      CHECK(a[s].edge_count() == E - static_cast<std::size_t>(std::floor(f * static_cast<double>(E) + 1e-9)));
      CHECK(a[s].node_count() == g[s].node_count());
      CHECK_NOTHROW(validate_graph(a));
      for (SubgraphId o : kSubgraphs)
        if (o != s) CHECK(edge_set(a, o) == edge_set(g, o));
      const auto kept = edge_set(a, s);
      const auto all = edge_set(g, s);
      CHECK(std::includes(all.begin(), all.end(), kept.begin(), kept.end()));
    }
}

TEST_CASE("drop_subgraphs examples") {
  const HeteroGraph g = build_graph(tiny_dataset());
  const HeteroGraph noK = drop_subgraphs(g, {SubgraphId::K});
  CHECK(noK[SubgraphId::K].edge_count() == 0);
  CHECK(noK[SubgraphId::K].node_count() == 0);
  CHECK(!noK.is_active(SubgraphId::K));
  CHECK(edge_set(noK, SubgraphId::M) == edge_set(g, SubgraphId::M));
  CHECK(edge_set(noK, SubgraphId::U) == edge_set(g, SubgraphId::U));
  CHECK_NOTHROW(validate_graph(noK));

  const HeteroGraph noU = drop_subgraphs(g, {SubgraphId::U});
  CHECK(noU[SubgraphId::U].node_count() == 0);
  CHECK(noU.review_count() == g.review_count());
  CHECK(noU.labels == g.labels);
  for (std::size_t r = 0; r < g.review_count(); ++r) CHECK(noU.review_local[index_of(SubgraphId::M)][r] != kNoNode);

  const HeteroGraph same = drop_subgraphs(g, {});
  for (SubgraphId s : kSubgraphs) CHECK(edge_set(same, s) == edge_set(g, s));

  CHECK_THROWS_AS(drop_subgraphs(g, {SubgraphId::K, SubgraphId::M, SubgraphId::U}), std::invalid_argument);
  CHECK_THROWS_AS(drop_subgraphs(g, {SubgraphId::M, SubgraphId::U}), std::invalid_argument);
}

TEST_CASE("sampling with a large fanout returns the full l-hop neighborhood") {
  const HeteroGraph g = build_graph(random_dataset(21, 6, 8, 40, 5));
  for (std::size_t layers : {1u, 2u, 3u}) {
    const std::uint32_t seeds[] = {0, 5, 17};
    const SampledGraph sg = sample_neighborhood(g, seeds, 1000, layers, 1);
    const auto expect = closure(g, seeds, layers);
    for (SubgraphId s : kSubgraphs) {
      const std::set<std::string> got(sg.graph[s].ids.begin(), sg.graph[s].ids.end());
      CHECK(got == expect[index_of(s)]);
    }
    CHECK_NOTHROW(validate_graph(sg.graph));
    // Induced edges: every source edge between sampled nodes survives.
    for (SubgraphId s : kSubgraphs) {
      std::size_t induced = 0;
      const auto& keep = expect[index_of(s)];
      for (const auto& edges : g[s].edges)
        for (const Edge& e : edges) induced += keep.count(g[s].ids[e.src]) && keep.count(g[s].ids[e.dst]);
      CHECK(sg.graph[s].edge_count() == induced);
    }
    for (std::size_t k = 0; k < 3; ++k) CHECK(sg.review_origin[sg.seeds[k]] == seeds[k]);
  }
}

TEST_CASE("sampling caps neighbors per relation at the fanout") {
  Dataset ds;
  ds.users = {user("u1", 2000)};
  // Distinct ratings and years so the user node is the only way to reach other reviews.
  ds.movies = {movie("m1", 1990, 5, {"drama"}), movie("m2", 1991, 8, {"drama"}), movie("m3", 1992, 9, {"drama"})};
  ds.reviews = {review("r0", "u1", "m1", 5, 2001, false), review("r1", "u1", "m2", 6, 2002, false),
                review("r2", "u1", "m3", 7, 2003, false)};
  const HeteroGraph g = build_graph(ds);
  const std::uint32_t seed[] = {0};
  std::set<std::size_t> sizes;
  for (std::uint64_t s = 0; s < 40; ++s) {
    const SampledGraph sg = sample_neighborhood(g, seed, 1, 2, s);
    std::size_t reviews = 0;
    for (auto t : sg.graph[SubgraphId::U].types) reviews += t == NodeType::Review;
    CHECK(reviews >= 1);
    CHECK(reviews <= 2);
    sizes.insert(reviews);
  }
  CHECK(sizes.size() == 2);  // the single draw sometimes hits the seed itself
  const SampledGraph full = sample_neighborhood(g, seed, 3, 2, 0);
  std::size_t reviews = 0;
  for (auto t : full.graph[SubgraphId::U].types) reviews += t == NodeType::Review;
  CHECK(reviews == 3);

  // One hop with fanout 1: the seed review's own neighbors, one per relation.
  const SampledGraph one = sample_neighborhood(g, seed, 1, 1, 3);
  CHECK(one.graph[SubgraphId::M].node_count() == 3);  // review, movie, rating
  CHECK(one.graph[SubgraphId::U].node_count() == 3);  // review, user, year
  CHECK(one.graph[SubgraphId::K].node_count() == 1);  // movie copy
}

TEST_CASE("sampling is deterministic and validates its arguments") {
  const HeteroGraph g = build_graph(random_dataset(4, 6, 8, 60, 5));
  const std::uint32_t seeds[] = {1, 2, 3};
  const SampledGraph a = sample_neighborhood(g, seeds, 2, 2, 99);
  const SampledGraph b = sample_neighborhood(g, seeds, 2, 2, 99);
  for (SubgraphId s : kSubgraphs) {
    CHECK(a.graph[s].ids == b.graph[s].ids);
    CHECK(edge_set(a.graph, s) == edge_set(b.graph, s));
  }
  const std::uint32_t bad[] = {60};
  CHECK_THROWS_AS(sample_neighborhood(g, bad, 2, 2, 0), std::out_of_range);
  CHECK_THROWS_AS(sample_neighborhood(g, seeds, 0, 2, 0), std::invalid_argument);
  CHECK_THROWS_AS(sample_neighborhood(g, seeds, 2, 0, 0), std::invalid_argument);
}

TEST_CASE("bridges survive sampling and ablation") {
  const HeteroGraph g = build_graph(random_dataset(8, 6, 8, 50, 5));
  const std::uint32_t seeds[] = {0, 10, 20, 30};
  for (std::uint64_t s = 0; s < 5; ++s) {
    const SampledGraph sg = sample_neighborhood(g, seeds, 2, 2, s);
    CHECK_NOTHROW(validate_graph(sg.graph));
    for (std::size_t m = 0; m < sg.graph.movie_count(); ++m) {
      const auto k = sg.graph.movie_local[0][m], mm = sg.graph.movie_local[1][m];
      REQUIRE(k != kNoNode);
      REQUIRE(mm != kNoNode);
      CHECK(sg.graph[SubgraphId::K].ids[k] == sg.graph[SubgraphId::M].ids[mm]);
    }
    const HeteroGraph sampled_ablated = ablate_edges(sg.graph, SubgraphId::U, 0.5, s);
    CHECK_NOTHROW(validate_graph(sampled_ablated));
  }
}

TEST_CASE("dataset round trip through files gives an isomorphic graph") {
  const Dataset ds = random_dataset(12, 5, 6, 30, 4);
  const auto dir = temp_dir("graph_roundtrip");
  save_dataset(ds, dir);
  const HeteroGraph a = build_graph(ds);
  const HeteroGraph b = build_graph(load_dataset(dir));
  for (SubgraphId s : kSubgraphs) CHECK(edge_set(a, s) == edge_set(b, s));
  CHECK(a.review_ids == b.review_ids);
  CHECK(a.labels == b.labels);
}

TEST_CASE("directed relation naming") {
  CHECK(directed_name(directed_index(Relation::ReviewMovie, false)) == "review_movie");
  CHECK(directed_name(directed_index(Relation::ReviewMovie, true)) == "review_movie.rev");
  CHECK(parse_subgraph("u") == SubgraphId::U);
  CHECK_THROWS_AS(parse_subgraph("X"), std::invalid_argument);
  for (Relation r : relations_of(SubgraphId::M)) CHECK(relation_info(r).subgraph == SubgraphId::M);
  CHECK(relations_of(SubgraphId::K).size() == 4);
  CHECK(relations_of(SubgraphId::M).size() == 3);
  CHECK(relations_of(SubgraphId::U).size() == 3);
}

TEST_SUITE_END();
