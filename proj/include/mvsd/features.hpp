#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mvsd/autograd.hpp"
#include "mvsd/graph.hpp"
#include "mvsd/records.hpp"

namespace mvsd {

class KgeModel;

enum class ViewId : std::uint8_t { Semantic, Meta, Knowledge };
std::string_view view_name(ViewId v);
ViewId parse_view(std::string_view name);

/// The two views of each subgraph, in channel order: K has {Knowledge,
/// Semantic}, M and U have {Semantic, Meta}.
std::array<ViewId, 2> views_of(SubgraphId s);
/// Channel slot (0 or 1) of `v` in subgraph `s`, or nullopt.
std::optional<std::size_t> view_slot(SubgraphId s, ViewId v);

inline constexpr std::size_t kSemanticDim = 768;
inline constexpr std::size_t kMetaWidth = 5;

/// Raw node features per (subgraph, channel slot).
struct FeatureTable {
  std::array<std::array<Tensor, 2>, 3> raw;

  Tensor& at(SubgraphId s, std::size_t slot) { return raw[index_of(s)][slot]; }
  const Tensor& at(SubgraphId s, std::size_t slot) const { return raw[index_of(s)][slot]; }
  const Tensor& view(SubgraphId s, ViewId v) const;
  /// Rows of every matrix restricted to a sampled graph's nodes.
  FeatureTable gather(const SampledGraph& sg) const;
};

/// Maps text to a fixed-width vector.
class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual std::size_t dim() const = 0;
  /// `key` identifies the text for lookup-based embedders; hashing ignores it.
  virtual std::vector<double> embed(std::string_view key, std::string_view text) const = 0;
};

/// Lowercased alphanumeric tokens of `text`.
std::vector<std::string> tokenize(std::string_view text);

/// Bag of words: each token maps to a pseudo-random +-1 vector seeded by its
/// FNV-1a hash; the text vector is the mean over tokens (zero if none).
class HashingEmbedder final : public TextEmbedder {
 public:
  explicit HashingEmbedder(std::size_t dim = kSemanticDim) : dim_(dim) {}
  std::size_t dim() const override { return dim_; }
  std::vector<double> embed(std::string_view key, std::string_view text) const override;
  std::vector<double> token_vector(std::string_view token) const;

 private:
  std::size_t dim_;
};

using EmbeddingMap = std::unordered_map<std::string, std::vector<double>>;

/// `id<TAB>v1,v2,...` per line. All vectors must share one width.
EmbeddingMap load_embeddings(const std::filesystem::path& file);
void save_embeddings(const std::vector<std::pair<std::string, std::vector<double>>>& rows,
                     const std::filesystem::path& file);

/// Looks vectors up by key and falls back to hashing for unknown keys.
class PrecomputedEmbedder final : public TextEmbedder {
 public:
  explicit PrecomputedEmbedder(EmbeddingMap table);
  static PrecomputedEmbedder from_file(const std::filesystem::path& file) { return PrecomputedEmbedder(load_embeddings(file)); }
  std::size_t dim() const override { return fallback_.dim(); }
  std::vector<double> embed(std::string_view key, std::string_view text) const override;
  bool contains(std::string_view key) const { return table_.count(std::string(key)) != 0; }

 private:
  EmbeddingMap table_;
  HashingEmbedder fallback_;
};

struct NodeText {
  std::string key;   // lookup key for precomputed embeddings
  std::string text;
};

/// Text of every textual node keyed by external node id: review text, movie
/// plot, user bio, cast bio. Reviews with an embedding_key use it as key.
std::unordered_map<std::string, NodeText> node_texts(const Dataset& ds);

/// One embedder row per node of every active subgraph. Rating, Year and Genre
/// nodes embed their label ("rating 7", "1994", "drama").
void semantic_view(const HeteroGraph& g, const std::unordered_map<std::string, NodeText>& texts,
                   const TextEmbedder& embedder, FeatureTable& out);

/// Column names per node type, in layout order.
std::span<const std::string_view> meta_fields(NodeType t);
/// Column of a named field; throws std::invalid_argument for unknown names.
std::size_t meta_column(NodeType t, std::string_view field);

using MetaValues = std::unordered_map<std::string, std::vector<std::optional<double>>>;
/// Raw metadata of review, user, movie and cast nodes keyed by external id.
/// Timestamps become fractional years.
MetaValues node_metadata(const Dataset& ds);

struct FieldStats {
  double mean = 0.0;
  double stddev = 0.0;
};

struct MetaStats {
  /// Per (subgraph, node type) the statistics of each column.
  std::map<std::pair<SubgraphId, NodeType>, std::vector<FieldStats>> fields;
};

/// Population z-score of `xs`, with 0 for missing entries and zero-variance fields.
std::vector<double> zscore(std::span<const std::optional<double>> xs, FieldStats stats);
FieldStats field_stats(std::span<const std::optional<double>> xs);

/// z-scored metadata for the M and U subgraphs. Review statistics come from
/// training-split reviews only; other node types use all their nodes.
MetaStats meta_view(const HeteroGraph& g, const MetaValues& values, FeatureTable& out);

/// K rows are TransE entity embeddings looked up by external id; unknown
/// entities get zeros. Throws if `dim` differs from the model dimension.
void knowledge_view(const HeteroGraph& g, const KgeModel& kge, std::size_t dim, FeatureTable& out);

/// Zero knowledge features for every K node (used when no KGE is supplied).
void zero_knowledge_view(const HeteroGraph& g, std::size_t dim, FeatureTable& out);

/// Single-layer view encoder: LeakyReLU(V W + b) with slope 0.01.
Var encode_view(const Var& raw, const Var& w, const Var& b);

inline constexpr double kLeakySlope = 0.01;

}  // namespace mvsd
