#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mvsd/graph.hpp"
#include "mvsd/records.hpp"
#include "mvsd/tensor.hpp"

namespace mvsd {

/// The 15 knowledge-base relations: show_in, rated, genre_is and one
/// is_<role>_of per cast role.
const std::vector<std::string>& kge_relations();
std::string role_relation(std::string_view role);

struct Triple {
  std::uint32_t head = 0;
  std::uint32_t rel = 0;
  std::uint32_t tail = 0;
  auto operator<=>(const Triple&) const = default;
};

/// De-duplicated triples over an entity vocabulary. Relation names must belong
/// to the vocabulary passed at construction (the 15-relation schema by default).
class TripleStore {
 public:
  TripleStore();
  explicit TripleStore(std::vector<std::string> relations);

  /// Returns false if the triple was already present.
  bool add(std::string_view head, std::string_view relation, std::string_view tail);
  bool contains(const Triple& t) const { return set_.count(t) != 0; }

  std::uint32_t entity_id(std::string_view name);
  std::uint32_t find_entity(std::string_view name) const;  // throws if absent
  std::uint32_t relation_id(std::string_view name) const;  // throws if absent

  const std::vector<Triple>& triples() const { return triples_; }
  const std::vector<std::string>& entities() const { return entities_; }
  const std::vector<std::string>& relations() const { return relations_; }
  std::size_t size() const { return triples_.size(); }
  bool empty() const { return triples_.empty(); }

  std::vector<TextTriple> to_text() const;
  static TripleStore from_text(const std::vector<TextTriple>& rows);
  /// Same vocabularies, triples restricted to `keep`.
  TripleStore subset(std::span<const std::size_t> keep) const;

 private:
  std::vector<std::string> entities_;
  std::unordered_map<std::string, std::uint32_t> entity_index_;
  std::vector<std::string> relations_;
  std::unordered_map<std::string, std::uint32_t> relation_index_;
  std::vector<Triple> triples_;
  std::set<Triple> set_;
};

/// (movie, show_in, year), (movie, rated, rating), (movie, genre_is, genre)
/// from the K subgraph plus (person, is_<role>_of, movie) per credit. Entity
/// names are the K node ids. Unknown roles throw DataError.
TripleStore kb_from_graph(const HeteroGraph& g, const std::vector<CastRecord>& casts);

struct KgeConfig {
  std::size_t dim = 128;
  double margin = 1.0;
  std::size_t epochs = 1000;
  std::size_t batch_size = 128;
  double lr = 0.01;
  int norm = 2;  // 1 or 2
  bool normalize = true;
  std::uint64_t seed = 0;
};

class KgeModel {
 public:
  KgeModel() = default;
  KgeModel(std::vector<std::string> entities, std::vector<std::string> relations, std::size_t dim, double margin,
           int norm);

  std::size_t dim() const { return dim_; }
  double margin() const { return margin_; }
  int norm() const { return norm_; }
  std::size_t entity_count() const { return entities_.size(); }
  std::size_t relation_count() const { return relations_.size(); }
  const std::vector<std::string>& entities() const { return entities_; }
  const std::vector<std::string>& relations() const { return relations_; }

  Tensor& entity_table() { return ent_; }
  const Tensor& entity_table() const { return ent_; }
  Tensor& relation_table() { return rel_; }
  const Tensor& relation_table() const { return rel_; }

  /// Embedding row of a named entity, or nullptr if unknown.
  const double* entity(std::string_view name) const;
  /// Clamps every entity row to L2 norm <= 1.
  void project_entities();

 private:
  std::vector<std::string> entities_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<std::string> relations_;
  std::size_t dim_ = 0;
  double margin_ = 1.0;
  int norm_ = 2;
  Tensor ent_;
  Tensor rel_;
};

/// ||h + r - t|| under the model's norm. Throws std::out_of_range on bad ids.
double energy(const KgeModel& m, const Triple& t);
/// max(0, margin + e_pos - e_neg).
double margin_loss(double margin, double e_pos, double e_neg);

/// Untrained model: uniform(+-6/sqrt(k)) rows, relations scaled to unit norm,
/// entities projected onto the unit ball.
KgeModel init_kge(const TripleStore& store, const KgeConfig& cfg);

/// Draws a corruption of `t` replacing head or tail (probability 0.5 each) by
/// a uniform entity, retrying while it reproduces a triple in `known`. Gives
/// up after a bounded number of attempts and returns the last draw.
Triple corrupt(const Triple& t, std::size_t entity_count, const TripleStore& known, Rng& rng);

/// Minibatch SGD on the margin ranking loss with one corrupted negative per
/// positive. Returns the model; `epoch_loss` (optional) receives the mean
/// per-pair loss of every epoch.
KgeModel train_kge(const TripleStore& store, const KgeConfig& cfg, std::vector<double>* epoch_loss = nullptr);

/// Fraction of (true, corrupted) pairs with energy(true) < energy(corrupted);
/// ties count as failures. Corruptions avoid triples in `known`.
double eval_kge(const KgeModel& m, const TripleStore& heldout, const TripleStore& known, std::size_t samples_per_triple,
                std::uint64_t seed);

/// Entity embeddings in the `id<TAB>v1,...` format.
void save_kge_embeddings(const KgeModel& m, const std::filesystem::path& file);
/// Rebuilds a lookup-only model (no relations) from an embedding file.
KgeModel load_kge_embeddings(const std::filesystem::path& file);

}  // namespace mvsd
