#include "mvsd/features.hpp"

#include <fmt/format.h>

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "mvsd/kge.hpp"
#include "mvsd/rng.hpp"

namespace mvsd {

std::string_view view_name(ViewId v) {
  switch (v) {
    case ViewId::Semantic: return "semantic";
    case ViewId::Meta: return "meta";
    case ViewId::Knowledge: return "knowledge";
  }
  return "?";
}

ViewId parse_view(std::string_view name) {
  if (name == "semantic" || name == "S") return ViewId::Semantic;
  if (name == "meta" || name == "M") return ViewId::Meta;
  if (name == "knowledge" || name == "K") return ViewId::Knowledge;
  throw std::invalid_argument("unknown view '" + std::string(name) + "' (expected semantic, meta or knowledge)");
}

std::array<ViewId, 2> views_of(SubgraphId s) {
  if (s == SubgraphId::K) return {ViewId::Knowledge, ViewId::Semantic};
  return {ViewId::Semantic, ViewId::Meta};
}

std::optional<std::size_t> view_slot(SubgraphId s, ViewId v) {
  const auto vs = views_of(s);
  for (std::size_t i = 0; i < 2; ++i)
    if (vs[i] == v) return i;
  return std::nullopt;
}

const Tensor& FeatureTable::view(SubgraphId s, ViewId v) const {
  const auto slot = view_slot(s, v);
  if (!slot) throw std::invalid_argument(fmt::format("subgraph {} has no {} view", subgraph_name(s), view_name(v)));
  return at(s, *slot);
}

FeatureTable FeatureTable::gather(const SampledGraph& sg) const {
  FeatureTable out;
  for (SubgraphId s : kSubgraphs) {
    const auto& origin = sg.node_origin[index_of(s)];
    for (std::size_t slot = 0; slot < 2; ++slot) {
      const Tensor& src = at(s, slot);
      if (src.rank() != 2) continue;
      const std::size_t d = src.cols();
      Tensor t = Tensor::matrix(origin.size(), d);
      for (std::size_t i = 0; i < origin.size(); ++i) {
        const auto r = src.row(origin[i]);
        std::copy(r.begin(), r.end(), t.row(i).begin());
      }
      out.at(s, slot) = std::move(t);
    }
  }
  return out;
}

// ---- text -------------------------------------------------------------------

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<double> HashingEmbedder::token_vector(std::string_view token) const {
  std::vector<double> v(dim_);
  std::uint64_t state = fnv1a64(token);
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < dim_; ++i) {
    if (i % 64 == 0) bits = splitmix64(state);
    v[i] = (bits >> (i % 64)) & 1 ? 1.0 : -1.0;
  }
  return v;
}

std::vector<double> HashingEmbedder::embed(std::string_view, std::string_view text) const {
  std::vector<double> out(dim_, 0.0);
  const auto tokens = tokenize(text);
  if (tokens.empty()) return out;
  for (const auto& tok : tokens) {
    const auto v = token_vector(tok);
    for (std::size_t i = 0; i < dim_; ++i) out[i] += v[i];
  }
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (double& x : out) x *= inv;
  return out;
}

EmbeddingMap load_embeddings(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open embedding file " + file.string());
  EmbeddingMap out;
  std::string line;
  std::size_t lineno = 0, width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    auto fail = [&](std::string_view what) {
      return DataError(fmt::format("{}:{}: {}", file.string(), lineno, what));
    };
    if (tab == std::string::npos) throw fail("expected id<TAB>values");
    std::string id = line.substr(0, tab);
    std::vector<double> v;
    const char* p = line.data() + tab + 1;
    const char* end = line.data() + line.size();
    while (p < end) {
      double x = 0;
      auto [next, ec] = std::from_chars(p, end, x);
      if (ec != std::errc() || !std::isfinite(x)) throw fail("malformed number");
      v.push_back(x);
      p = next;
      if (p < end) {
        if (*p != ',') throw fail("expected ',' between values");
        ++p;
      }
    }
    if (v.empty()) throw fail("empty vector");
    if (width == 0) width = v.size();
    if (v.size() != width) throw fail(fmt::format("vector has {} values, expected {}", v.size(), width));
    if (!out.emplace(std::move(id), std::move(v)).second) throw fail("duplicate id");
  }
  return out;
}

void save_embeddings(const std::vector<std::pair<std::string, std::vector<double>>>& rows,
                     const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  for (const auto& [id, v] : rows) {
    out << id << '\t';
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << fmt::format("{:.17g}", v[i]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + file.string());
}

PrecomputedEmbedder::PrecomputedEmbedder(EmbeddingMap table)
    : table_(std::move(table)), fallback_(table_.empty() ? kSemanticDim : table_.begin()->second.size()) {}

std::vector<double> PrecomputedEmbedder::embed(std::string_view key, std::string_view text) const {
  const auto it = table_.find(std::string(key));
  if (it != table_.end()) return it->second;
  return fallback_.embed(key, text);
}

std::unordered_map<std::string, NodeText> node_texts(const Dataset& ds) {
  std::unordered_map<std::string, NodeText> out;
  for (const auto& r : ds.reviews) {
    const std::string id = "review:" + r.review_id;
    out[id] = NodeText{r.embedding_key.empty() ? id : r.embedding_key, r.text};
  }
  for (const auto& m : ds.movies) out["movie:" + m.movie_id] = NodeText{"movie:" + m.movie_id, m.plot};
  for (const auto& u : ds.users) out["user:" + u.user_id] = NodeText{"user:" + u.user_id, u.bio};
  for (const auto& c : ds.casts) out["cast:" + c.person_id] = NodeText{"cast:" + c.person_id, c.bio};
  return out;
}

namespace {

// "rating:7" -> "rating 7", "year:1994" -> "1994", "genre:drama" -> "drama".
std::string label_text(NodeType t, const std::string& id) {
  const std::string value = id.substr(id.find(':') + 1);
  return t == NodeType::Rating ? "rating " + value : value;
}

double label_value(const std::string& id) {
  const std::string value = id.substr(id.find(':') + 1);
  double x = 0;
  std::from_chars(value.data(), value.data() + value.size(), x);
  return x;
}

}  // namespace

void semantic_view(const HeteroGraph& g, const std::unordered_map<std::string, NodeText>& texts,
                   const TextEmbedder& embedder, FeatureTable& out) {
  std::unordered_map<std::string, std::vector<double>> cache;
  for (SubgraphId s : kSubgraphs) {
    const auto& sd = g[s];
    Tensor t = Tensor::matrix(sd.node_count(), embedder.dim());
    for (std::size_t i = 0; i < sd.node_count(); ++i) {
      NodeText nt;
      switch (sd.types[i]) {
        case NodeType::Rating:
        case NodeType::Year:
        case NodeType::Genre:
          nt.key = sd.ids[i];
          nt.text = label_text(sd.types[i], sd.ids[i]);
          break;
        default: {
          const auto it = texts.find(sd.ids[i]);
          nt = it == texts.end() ? NodeText{sd.ids[i], ""} : it->second;
        }
      }
      auto [pos, fresh] = cache.try_emplace(nt.key + '\x1f' + nt.text);
      if (fresh) {
        pos->second = embedder.embed(nt.key, nt.text);
        if (pos->second.size() != embedder.dim()) throw ShapeError("embedder returned a vector of the wrong width");
      }
      std::copy(pos->second.begin(), pos->second.end(), t.row(i).begin());
    }
    out.at(s, *view_slot(s, ViewId::Semantic)) = std::move(t);
  }
}

// ---- metadata ---------------------------------------------------------------

namespace {

constexpr std::array<std::string_view, 4> kReviewFields = {"time", "helpful_votes", "total_votes", "score"};
constexpr std::array<std::string_view, 3> kUserFields = {"created_at", "badge_count", "review_count"};
constexpr std::array<std::string_view, 5> kMovieFields = {"year", "is_adult", "runtime", "rating", "vote_count"};
constexpr std::array<std::string_view, 3> kCastFields = {"birth_year", "death_year", "movie_count"};
constexpr std::array<std::string_view, 1> kRatingFields = {"rating"};
constexpr std::array<std::string_view, 1> kYearFields = {"year"};

}  // namespace

std::span<const std::string_view> meta_fields(NodeType t) {
  switch (t) {
    case NodeType::Review: return kReviewFields;
    case NodeType::User: return kUserFields;
    case NodeType::Movie: return kMovieFields;
    case NodeType::Cast: return kCastFields;
    case NodeType::Rating: return kRatingFields;
    case NodeType::Year: return kYearFields;
    case NodeType::Genre: return {};
  }
  return {};
}

std::size_t meta_column(NodeType t, std::string_view field) {
  const auto fields = meta_fields(t);
  for (std::size_t i = 0; i < fields.size(); ++i)
    if (fields[i] == field) return i;
  throw std::invalid_argument(fmt::format("unknown metadata field '{}' for {} nodes", field, node_type_name(t)));
}

MetaValues node_metadata(const Dataset& ds) {
  MetaValues out;
  for (const auto& r : ds.reviews) {
    out["review:" + r.review_id] = {fractional_year(r.timestamp), double(r.helpful_votes), double(r.total_votes),
                                    double(r.score)};
  }
  for (const auto& u : ds.users) {
    out["user:" + u.user_id] = {fractional_year(u.created_at), double(u.badge_count), double(u.review_count)};
  }
  for (const auto& m : ds.movies) {
    out["movie:" + m.movie_id] = {double(m.year), m.is_adult ? 1.0 : 0.0, m.runtime, m.rating, double(m.vote_count)};
  }
  for (const auto& c : ds.casts) {
    std::optional<double> death;
    if (c.death_year) death = double(*c.death_year);
    out["cast:" + c.person_id] = {double(c.birth_year), death, double(c.movie_count)};
  }
  return out;
}

FieldStats field_stats(std::span<const std::optional<double>> xs) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& x : xs)
    if (x) {
      sum += *x;
      ++n;
    }
  if (n == 0) return {};
  const double mean = sum / static_cast<double>(n);
  double ss = 0;
  for (const auto& x : xs)
    if (x) ss += (*x - mean) * (*x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(n))};
}

std::vector<double> zscore(std::span<const std::optional<double>> xs, FieldStats stats) {
  std::vector<double> out(xs.size(), 0.0);
  if (stats.stddev == 0.0) return out;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (xs[i]) out[i] = (*xs[i] - stats.mean) / stats.stddev;
  return out;
}

MetaStats meta_view(const HeteroGraph& g, const MetaValues& values, FeatureTable& out) {
  MetaStats stats;
  for (SubgraphId s : {SubgraphId::M, SubgraphId::U}) {
    const auto& sd = g[s];
    Tensor t = Tensor::matrix(sd.node_count(), kMetaWidth);
    // Reviews count as training nodes only when their split is Train.
    std::vector<char> train(sd.node_count(), 1);
    for (std::uint32_t r = 0; r < g.review_count(); ++r) {
      const auto loc = g.review_local[index_of(s)][r];
      if (loc != kNoNode) train[loc] = g.splits[r] == Split::Train;
    }
    for (NodeType type : {NodeType::Movie, NodeType::Review, NodeType::Rating, NodeType::User, NodeType::Year}) {
      const std::size_t width = meta_fields(type).size();
      std::vector<std::uint32_t> nodes;
      for (std::uint32_t i = 0; i < sd.node_count(); ++i)
        if (sd.types[i] == type) nodes.push_back(i);
      if (nodes.empty()) continue;
      std::vector<FieldStats> per_field(width);
      for (std::size_t f = 0; f < width; ++f) {
        std::vector<std::optional<double>> all(nodes.size()), fit;
        for (std::size_t k = 0; k < nodes.size(); ++k) {
          const std::string& id = sd.ids[nodes[k]];
          if (type == NodeType::Rating || type == NodeType::Year) {
            all[k] = label_value(id);
          } else {
            const auto it = values.find(id);
            if (it != values.end() && f < it->second.size()) all[k] = it->second[f];
          }
          if (train[nodes[k]]) fit.push_back(all[k]);
        }
        per_field[f] = field_stats(fit);
        const auto z = zscore(all, per_field[f]);
        for (std::size_t k = 0; k < nodes.size(); ++k) t(nodes[k], f) = z[k];
      }
      stats.fields[{s, type}] = std::move(per_field);
    }
    out.at(s, *view_slot(s, ViewId::Meta)) = std::move(t);
  }
  return stats;
}

void knowledge_view(const HeteroGraph& g, const KgeModel& kge, std::size_t dim, FeatureTable& out) {
  if (kge.dim() != dim) {
    throw ShapeError(fmt::format("knowledge embeddings have dimension {}, configured {}", kge.dim(), dim));
  }
  const auto& sd = g[SubgraphId::K];
  Tensor t = Tensor::matrix(sd.node_count(), dim);
  for (std::size_t i = 0; i < sd.node_count(); ++i) {
    if (const double* row = kge.entity(sd.ids[i])) std::copy(row, row + dim, t.row(i).begin());
  }
  out.at(SubgraphId::K, *view_slot(SubgraphId::K, ViewId::Knowledge)) = std::move(t);
}

void zero_knowledge_view(const HeteroGraph& g, std::size_t dim, FeatureTable& out) {
  out.at(SubgraphId::K, *view_slot(SubgraphId::K, ViewId::Knowledge)) = Tensor::matrix(g[SubgraphId::K].node_count(), dim);
}

Var encode_view(const Var& raw, const Var& w, const Var& b) {
  return leaky_relu(add_row(matmul(raw, w), b), kLeakySlope);
}

}  // namespace mvsd
