#include "mvsd/kge.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mvsd/features.hpp"
#include "mvsd/rng.hpp"

namespace mvsd {

const std::vector<std::string>& kge_relations() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v = {"show_in", "rated", "genre_is"};
    for (auto role : kCastRoles) v.push_back(role_relation(role));
    return v;
  }();
  return names;
}

std::string role_relation(std::string_view role) { return "is_" + std::string(role) + "_of"; }

// ---- triple store -----------------------------------------------------------

TripleStore::TripleStore() : TripleStore(kge_relations()) {}

TripleStore::TripleStore(std::vector<std::string> relations) : relations_(std::move(relations)) {
  for (std::uint32_t i = 0; i < relations_.size(); ++i) relation_index_.emplace(relations_[i], i);
}

std::uint32_t TripleStore::entity_id(std::string_view name) {
  auto [it, fresh] = entity_index_.try_emplace(std::string(name), static_cast<std::uint32_t>(entities_.size()));
  if (fresh) entities_.emplace_back(name);
  return it->second;
}

std::uint32_t TripleStore::find_entity(std::string_view name) const {
  const auto it = entity_index_.find(std::string(name));
  if (it == entity_index_.end()) throw std::out_of_range("unknown entity '" + std::string(name) + "'");
  return it->second;
}

std::uint32_t TripleStore::relation_id(std::string_view name) const {
  const auto it = relation_index_.find(std::string(name));
  if (it == relation_index_.end()) throw DataError("unknown relation '" + std::string(name) + "'");
  return it->second;
}

bool TripleStore::add(std::string_view head, std::string_view relation, std::string_view tail) {
  const std::uint32_t r = relation_id(relation);
  const Triple t{entity_id(head), r, entity_id(tail)};
  if (!set_.insert(t).second) return false;
  triples_.push_back(t);
  return true;
}

std::vector<TextTriple> TripleStore::to_text() const {
  std::vector<TextTriple> out;
  out.reserve(triples_.size());
  for (const auto& t : triples_) out.push_back({entities_[t.head], relations_[t.rel], entities_[t.tail]});
  return out;
}

TripleStore TripleStore::from_text(const std::vector<TextTriple>& rows) {
  TripleStore store;
  for (const auto& row : rows) store.add(row.head, row.relation, row.tail);
  return store;
}

TripleStore TripleStore::subset(std::span<const std::size_t> keep) const {
  TripleStore out(relations_);
  out.entities_ = entities_;
  out.entity_index_ = entity_index_;
  for (std::size_t k : keep) {
    const Triple& t = triples_.at(k);
    if (out.set_.insert(t).second) out.triples_.push_back(t);
  }
  return out;
}

TripleStore kb_from_graph(const HeteroGraph& g, const std::vector<CastRecord>& casts) {
  TripleStore store;
  const auto& K = g[SubgraphId::K];
  auto emit = [&](Relation r, std::string_view name) {
    for (const Edge& e : K.edges[static_cast<std::size_t>(r)]) store.add(K.ids[e.src], name, K.ids[e.dst]);
  };
  emit(Relation::MovieYear, "show_in");
  emit(Relation::MovieRatingK, "rated");
  emit(Relation::MovieGenre, "genre_is");
  for (const auto& c : casts) {
    for (const auto& credit : c.credits) {
      if (!is_known_role(credit.role)) {
        throw DataError(fmt::format("cast '{}' has unknown role '{}'", c.person_id, credit.role));
      }
      store.add("cast:" + c.person_id, role_relation(credit.role), "movie:" + credit.movie_id);
    }
  }
  return store;
}

// ---- model ------------------------------------------------------------------

KgeModel::KgeModel(std::vector<std::string> entities, std::vector<std::string> relations, std::size_t dim,
                   double margin, int norm)
    : entities_(std::move(entities)),
      relations_(std::move(relations)),
      dim_(dim),
      margin_(margin),
      norm_(norm),
      ent_(Tensor::matrix(entities_.size(), dim)),
      rel_(Tensor::matrix(relations_.size(), dim)) {
  if (dim == 0) throw std::invalid_argument("KGE dimension must be at least 1");
  if (norm != 1 && norm != 2) throw std::invalid_argument("KGE norm must be 1 or 2");
  for (std::uint32_t i = 0; i < entities_.size(); ++i) index_.emplace(entities_[i], i);
}

const double* KgeModel::entity(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : ent_.row(it->second).data();
}

void KgeModel::project_entities() {
  for (std::size_t i = 0; i < entities_.size(); ++i) {
    auto row = ent_.row(i);
    double ss = 0;
    for (double x : row) ss += x * x;
    if (ss > 1.0) {
      const double inv = 1.0 / std::sqrt(ss);
      for (double& x : row) x *= inv;
    }
  }
}

double energy(const KgeModel& m, const Triple& t) {
  if (t.head >= m.entity_count() || t.tail >= m.entity_count() || t.rel >= m.relation_count()) {
    throw std::out_of_range(fmt::format("triple ({}, {}, {}) out of range", t.head, t.rel, t.tail));
  }
  const auto h = m.entity_table().row(t.head);
  const auto r = m.relation_table().row(t.rel);
  const auto tl = m.entity_table().row(t.tail);
  double acc = 0;
  for (std::size_t i = 0; i < m.dim(); ++i) {
    const double d = h[i] + r[i] - tl[i];
    acc += m.norm() == 1 ? std::abs(d) : d * d;
  }
  return m.norm() == 1 ? acc : std::sqrt(acc);
}

double margin_loss(double margin, double e_pos, double e_neg) { return std::max(0.0, margin + e_pos - e_neg); }

KgeModel init_kge(const TripleStore& store, const KgeConfig& cfg) {
  if (!(cfg.margin > 0)) throw std::invalid_argument("KGE margin must be positive");
  KgeModel m(store.entities(), store.relations(), cfg.dim, cfg.margin, cfg.norm);
  Rng rng(derive_seed(cfg.seed, "kge.init"));
  const double bound = 6.0 / std::sqrt(static_cast<double>(cfg.dim));
  m.entity_table() = uniform_tensor({store.entities().size(), cfg.dim}, -bound, bound, rng);
  m.relation_table() = uniform_tensor({store.relations().size(), cfg.dim}, -bound, bound, rng);
  for (std::size_t i = 0; i < m.relation_count(); ++i) {
    auto row = m.relation_table().row(i);
    double ss = 0;
    for (double x : row) ss += x * x;
    const double inv = 1.0 / std::sqrt(ss);
    for (double& x : row) x *= inv;
  }
  if (cfg.normalize) m.project_entities();
  return m;
}

Triple corrupt(const Triple& t, std::size_t entity_count, const TripleStore& known, Rng& rng) {
  constexpr int kMaxAttempts = 100;
  Triple c = t;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    c = t;
    const auto e = static_cast<std::uint32_t>(rng.uniform_index(entity_count));
    if (rng.uniform() < 0.5) {
      c.head = e;
    } else {
      c.tail = e;
    }
    if (!known.contains(c)) break;
  }
  return c;
}

namespace {

// Adds s * d(energy)/d(h + r - t) into `out`.
void energy_direction(const KgeModel& m, const Triple& t, std::vector<double>& out) {
  const auto h = m.entity_table().row(t.head);
  const auto r = m.relation_table().row(t.rel);
  const auto tl = m.entity_table().row(t.tail);
  out.resize(m.dim());
  double ss = 0;
  for (std::size_t i = 0; i < m.dim(); ++i) {
    out[i] = h[i] + r[i] - tl[i];
    ss += out[i] * out[i];
  }
  if (m.norm() == 1) {
    for (double& x : out) x = x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0);
  } else if (ss > 0) {
    const double inv = 1.0 / std::sqrt(ss);
    for (double& x : out) x *= inv;
  }
}

}  // namespace

KgeModel train_kge(const TripleStore& store, const KgeConfig& cfg, std::vector<double>* epoch_loss) {
  if (store.empty()) throw std::invalid_argument("cannot train KGE on an empty triple store");
  if (cfg.batch_size == 0) throw std::invalid_argument("KGE batch size must be at least 1");
  KgeModel m = init_kge(store, cfg);
  Rng rng(derive_seed(cfg.seed, "kge.train"));
  std::vector<std::size_t> order(store.size());
  std::iota(order.begin(), order.end(), 0);
  Tensor ent_grad = Tensor::matrix(m.entity_count(), cfg.dim);
  Tensor rel_grad = Tensor::matrix(m.relation_count(), cfg.dim);
  std::vector<double> dp, dn;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      ent_grad.fill(0.0);
      rel_grad.fill(0.0);
      for (std::size_t k = start; k < stop; ++k) {
        const Triple& pos = store.triples()[order[k]];
        const Triple neg = corrupt(pos, m.entity_count(), store, rng);
        const double loss = margin_loss(cfg.margin, energy(m, pos), energy(m, neg));
        total += loss;
        if (loss <= 0) continue;
        energy_direction(m, pos, dp);
        energy_direction(m, neg, dn);
        for (std::size_t i = 0; i < cfg.dim; ++i) {
          ent_grad(pos.head, i) += dp[i];
          rel_grad(pos.rel, i) += dp[i];
          ent_grad(pos.tail, i) -= dp[i];
          ent_grad(neg.head, i) -= dn[i];
          rel_grad(neg.rel, i) -= dn[i];
          ent_grad(neg.tail, i) += dn[i];
        }
      }
      auto ed = m.entity_table().data();
      auto eg = ent_grad.data();
      for (std::size_t i = 0; i < ed.size(); ++i) ed[i] -= cfg.lr * eg[i];
      auto rd = m.relation_table().data();
      auto rg = rel_grad.data();
      for (std::size_t i = 0; i < rd.size(); ++i) rd[i] -= cfg.lr * rg[i];
      if (cfg.normalize) m.project_entities();
    }
    if (epoch_loss) epoch_loss->push_back(total / static_cast<double>(order.size()));
  }
  return m;
}

double eval_kge(const KgeModel& m, const TripleStore& heldout, const TripleStore& known, std::size_t samples_per_triple,
                std::uint64_t seed) {
  if (heldout.empty()) throw std::invalid_argument("held-out triple set is empty");
  if (samples_per_triple == 0) throw std::invalid_argument("samples per triple must be at least 1");
  Rng rng(seed);
  std::size_t wins = 0, total = 0;
  for (const Triple& t : heldout.triples()) {
    const double e = energy(m, t);
    for (std::size_t k = 0; k < samples_per_triple; ++k) {
      const Triple c = corrupt(t, m.entity_count(), known, rng);
      wins += e < energy(m, c) ? 1 : 0;
      ++total;
    }
  }
  return static_cast<double>(wins) / static_cast<double>(total);
}

void save_kge_embeddings(const KgeModel& m, const std::filesystem::path& file) {
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  rows.reserve(m.entity_count());
  for (std::size_t i = 0; i < m.entity_count(); ++i) {
    const auto r = m.entity_table().row(i);
    rows.emplace_back(m.entities()[i], std::vector<double>(r.begin(), r.end()));
  }
  save_embeddings(rows, file);
}

KgeModel load_kge_embeddings(const std::filesystem::path& file) {
  const EmbeddingMap table = load_embeddings(file);
  if (table.empty()) throw DataError("embedding file " + file.string() + " is empty");
  std::vector<std::string> names;
  names.reserve(table.size());
  for (const auto& [name, v] : table) names.push_back(name);
  std::sort(names.begin(), names.end());
  const std::size_t dim = table.begin()->second.size();
  KgeModel m(names, {}, dim, 1.0, 2);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& v = table.at(names[i]);
    std::copy(v.begin(), v.end(), m.entity_table().row(i).begin());
  }
  return m;
}

}  // namespace mvsd
