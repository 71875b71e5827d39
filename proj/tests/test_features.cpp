#include <doctest.h>

#include <cmath>
#include <fstream>

#include "mvsd/features.hpp"
#include "mvsd/kge.hpp"
#include "test_util.hpp"

using namespace mvsd;
using namespace testutil;

TEST_SUITE_BEGIN("features");

TEST_CASE("zscore examples") {
  const std::vector<std::optional<double>> xs = {1.0, 2.0, 3.0};
  const auto z = zscore(xs, field_stats(xs));
  CHECK(z[0] == doctest::Approx(-1.224745).epsilon(1e-6));
  CHECK(z[1] == doctest::Approx(0.0));
  CHECK(z[2] == doctest::Approx(1.224745).epsilon(1e-6));

  const std::vector<std::optional<double>> flat = {4.0, 4.0, 4.0};
  for (double v : zscore(flat, field_stats(flat))) CHECK(v == 0.0);

  const std::vector<std::optional<double>> gaps = {1.0, std::nullopt, 3.0};
  const auto zg = zscore(gaps, field_stats(gaps));
  CHECK(zg[0] == doctest::Approx(-1.0));
  CHECK(zg[1] == 0.0);
  CHECK(zg[2] == doctest::Approx(1.0));
}

TEST_CASE("zscore of a random field has mean 0 and unit variance") {
  Rng rng(5);
  std::vector<std::optional<double>> xs;
  for (int i = 0; i < 200; ++i) xs.push_back(rng.uniform(-10, 30));
  const auto z = zscore(xs, field_stats(xs));
  double m = 0, v = 0;
  for (double x : z) m += x;
  m /= 200;
  for (double x : z) v += (x - m) * (x - m);
  CHECK(std::abs(m) < 1e-12);
  CHECK(v / 200 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("tokenize lowercases and splits on non-alphanumerics") {
  CHECK(tokenize("Hello, World! 42x") == std::vector<std::string>{"hello", "world", "42x"});
  CHECK(tokenize("  ...  ").empty());
}

TEST_CASE("hashing embedder is the token mean") {
  const HashingEmbedder h(64);
  const auto a = h.embed("", "a");
  const auto b = h.embed("", "b");
  const auto ab = h.embed("", "a b");
  REQUIRE(ab.size() == 64);
  for (std::size_t i = 0; i < 64; ++i) CHECK(ab[i] == doctest::Approx((a[i] + b[i]) / 2));
  for (double x : h.embed("", "")) CHECK(x == 0.0);
  for (double x : h.token_vector("movie")) CHECK(std::abs(x) == 1.0);
  CHECK(h.embed("k1", "Same Text") == h.embed("k2", "same text"));
  CHECK(h.embed("", "alpha") != h.embed("", "beta"));
}

TEST_CASE("precomputed embeddings load, look up and fall back") {
  const auto dir = temp_dir("embeddings");
  save_embeddings({{"review:r1", {1.0, 2.0, 3.0}}, {"x", {0.5, -0.25, 1e-300}}}, dir / "e.tsv");
  const auto pe = PrecomputedEmbedder::from_file(dir / "e.tsv");
  CHECK(pe.dim() == 3);
  CHECK(pe.contains("x"));
  CHECK(pe.embed("review:r1", "ignored") == std::vector<double>{1.0, 2.0, 3.0});
  CHECK(pe.embed("x", "") == std::vector<double>{0.5, -0.25, 1e-300});
  CHECK(pe.embed("other", "words here") == HashingEmbedder(3).embed("", "words here"));

  std::ofstream(dir / "bad.tsv") << "a\t1,2\nb\t1,2,3\n";
  CHECK_THROWS_AS(load_embeddings(dir / "bad.tsv"), DataError);
  std::ofstream(dir / "nan.tsv") << "a\t1,nan\n";
  CHECK_THROWS_AS(load_embeddings(dir / "nan.tsv"), DataError);
  CHECK_THROWS_AS(load_embeddings(dir / "missing.tsv"), DataError);
}

TEST_CASE("semantic view rows follow node text") {
  const Dataset ds = tiny_dataset();
  const HeteroGraph g = build_graph(ds);
  FeatureTable ft;
  const HashingEmbedder h(16);
  semantic_view(g, node_texts(ds), h, ft);
  for (SubgraphId s : kSubgraphs) {
    const Tensor& t = ft.view(s, ViewId::Semantic);
    REQUIRE(t.rows() == g[s].node_count());
    CHECK(t.cols() == 16);
    for (std::size_t i = 0; i < g[s].node_count(); ++i) {
      const auto& id = g[s].ids[i];
      std::vector<double> want;
      if (id == "review:r1") want = h.embed("", "review text r1");
      else if (id == "movie:m2") want = h.embed("", "plot of m2");
      else if (id == "rating:7") want = h.embed("", "rating 7");
      else if (id == "year:1994") want = h.embed("", "1994");
      else if (id == "genre:comedy") want = h.embed("", "comedy");
      else if (id == "user:u1") want = std::vector<double>(16, 0.0);
      else continue;
      const auto row = t.row(i);
      CHECK(std::vector<double>(row.begin(), row.end()) == want);
    }
  }
  // Bridge copies carry the same semantic row.
  for (std::size_t r = 0; r < g.review_count(); ++r) {
    const auto a = ft.view(SubgraphId::M, ViewId::Semantic).row(g.review_local[1][r]);
    const auto b = ft.view(SubgraphId::U, ViewId::Semantic).row(g.review_local[2][r]);
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }
}

TEST_CASE("metadata view z-scores reviews with training statistics") {
  Dataset ds = tiny_dataset();
  HeteroGraph g = build_graph(ds);
  g.splits = {Split::Train, Split::Train, Split::Test, Split::Valid};
  FeatureTable ft;
  const MetaStats st = meta_view(g, node_metadata(ds), ft);
  const auto& rs = st.fields.at({SubgraphId::M, NodeType::Review});
  const std::size_t score = meta_column(NodeType::Review, "score");
  // Train reviews have scores 7 and 3.
  CHECK(rs[score].mean == doctest::Approx(5.0));
  CHECK(rs[score].stddev == doctest::Approx(2.0));
  const Tensor& M = ft.view(SubgraphId::M, ViewId::Meta);
  CHECK(M.cols() == kMetaWidth);
  CHECK(M(g.review_local[1][2], score) == doctest::Approx(2.0));   // score 9
  CHECK(M(g.review_local[1][3], score) == doctest::Approx(2.5));   // score 10
  // Unused trailing columns stay zero.
  for (std::size_t c = meta_fields(NodeType::Review).size(); c < kMetaWidth; ++c) CHECK(M(g.review_local[1][0], c) == 0.0);
  // Every M/U meta column over all movies has mean zero.
  const std::size_t rating = meta_column(NodeType::Movie, "rating");
  double sum = 0;
  for (std::size_t m = 0; m < g.movie_count(); ++m) sum += M(g.movie_local[1][m], rating);
  CHECK(std::abs(sum) < 1e-12);
  CHECK_THROWS_AS(meta_column(NodeType::Movie, "budget"), std::invalid_argument);
}

TEST_CASE("missing cast death year becomes zero after z-scoring") {
  Dataset ds = tiny_dataset();
  ds.casts[0].death_year = 2000;
  ds.casts[1].death_year = 2010;
  const MetaValues mv = node_metadata(ds);
  const auto col = meta_column(NodeType::Cast, "death_year");
  CHECK(mv.at("cast:p3")[col] == std::nullopt);
  CHECK(*mv.at("cast:p1")[col] == 2000.0);
}

TEST_CASE("knowledge view rows are bounded entity embeddings") {
  const Dataset ds = random_dataset(2, 4, 6, 10, 5);
  const HeteroGraph g = build_graph(ds);
  const TripleStore kb = kb_from_graph(g, ds.casts);
  KgeConfig cfg;
  cfg.dim = 12;
  cfg.epochs = 20;
  const KgeModel m = train_kge(kb, cfg);
  FeatureTable ft;
  knowledge_view(g, m, 12, ft);
  const Tensor& K = ft.view(SubgraphId::K, ViewId::Knowledge);
  REQUIRE(K.rows() == g[SubgraphId::K].node_count());
  for (std::size_t i = 0; i < K.rows(); ++i) {
    double n = 0;
    for (double x : K.row(i)) n += x * x;
    CHECK(std::sqrt(n) <= 1.0 + 1e-9);
    const double* e = m.entity(g[SubgraphId::K].ids[i]);
    if (e) CHECK(std::equal(K.row(i).begin(), K.row(i).end(), e));
  }
  CHECK_THROWS_AS(knowledge_view(g, m, 13, ft), ShapeError);
  zero_knowledge_view(g, 12, ft);
  CHECK(ft.view(SubgraphId::K, ViewId::Knowledge) == Tensor::matrix(K.rows(), 12));
}

TEST_CASE("view slots per subgraph") {
  CHECK(views_of(SubgraphId::K) == std::array<ViewId, 2>{ViewId::Knowledge, ViewId::Semantic});
  CHECK(views_of(SubgraphId::M) == std::array<ViewId, 2>{ViewId::Semantic, ViewId::Meta});
  CHECK(view_slot(SubgraphId::U, ViewId::Knowledge) == std::nullopt);
  CHECK(view_slot(SubgraphId::U, ViewId::Meta) == 1u);
  CHECK(parse_view("semantic") == ViewId::Semantic);
  CHECK_THROWS_AS(parse_view("audio"), std::invalid_argument);
}

TEST_CASE("encoder of zeros with zero bias gives zeros of width 128") {
  Tape tape;
  Rng rng(1);
  const Var raw = tape.constant(Tensor::matrix(5, 768));
  const Var w = tape.constant(glorot_uniform(768, 128, rng));
  const Var b = tape.constant(Tensor::matrix(1, 128));
  const Var h = encode_view(raw, w, b);
  CHECK(h.value().rows() == 5);
  CHECK(h.value().cols() == 128);
  CHECK(h.value() == Tensor::matrix(5, 128));
}

TEST_CASE("encoder applies leaky relu with slope 0.01") {
  Tape tape;
  const Var raw = tape.constant(Tensor::from_rows({{1.0, -2.0}}));
  const Var w = tape.constant(Tensor::identity(2));
  const Var b = tape.constant(Tensor::from_rows({{0.0, 0.5}}));
  const Tensor h = encode_view(raw, w, b).value();
  CHECK(h(0, 0) == doctest::Approx(1.0));
  CHECK(h(0, 1) == doctest::Approx(-0.015));
}

TEST_CASE("feature gather follows a sampled graph") {
  const Dataset ds = random_dataset(7, 5, 6, 30, 4);
  const HeteroGraph g = build_graph(ds);
  FeatureTable ft;
  semantic_view(g, node_texts(ds), HashingEmbedder(8), ft);
  meta_view(g, node_metadata(ds), ft);
  zero_knowledge_view(g, 4, ft);
  const std::uint32_t seeds[] = {3, 4};
  const SampledGraph sg = sample_neighborhood(g, seeds, 2, 2, 5);
  const FeatureTable sub = ft.gather(sg);
  for (SubgraphId s : kSubgraphs)
    for (std::size_t slot = 0; slot < 2; ++slot) {
      const Tensor& t = sub.at(s, slot);
      REQUIRE(t.rows() == sg.graph[s].node_count());
      for (std::size_t i = 0; i < t.rows(); ++i) {
        const auto src = ft.at(s, slot).row(sg.node_origin[index_of(s)][i]);
        CHECK(std::equal(src.begin(), src.end(), t.row(i).begin()));
      }
    }
}

TEST_SUITE_END();
