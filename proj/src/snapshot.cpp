#include "mvsd/snapshot.hpp"

#include <fmt/format.h>

#include <cstring>
#include <map>
#include <stdexcept>

#include "mvsd/binio.hpp"

namespace mvsd {

namespace {

constexpr std::string_view kMagic = "MVSG";

std::uint32_t tag(const char (&s)[5]) {
  std::uint32_t t;
  std::memcpy(&t, s, 4);
  return t;
}

void write_ids(bin::Writer& w, const std::vector<std::uint32_t>& v) {
  w.u64(v.size());
  w.bytes(v.data(), v.size() * sizeof(std::uint32_t));
}

std::vector<std::uint32_t> read_ids(bin::Reader& r) {
  const std::uint64_t n = r.u64();
  if (n > r.remaining() / sizeof(std::uint32_t)) throw DataError("truncated snapshot");
  std::vector<std::uint32_t> v(n);
  r.bytes(v.data(), n * sizeof(std::uint32_t));
  return v;
}

std::string graph_section(const HeteroGraph& g) {
  bin::Writer w;
  for (SubgraphId s : kSubgraphs) {
    const auto& sd = g[s];
    w.u8(g.is_active(s) ? 1 : 0);
    w.u64(sd.node_count());
    for (std::size_t i = 0; i < sd.node_count(); ++i) {
      w.u8(static_cast<std::uint8_t>(sd.types[i]));
      w.str(sd.ids[i]);
    }
    for (const auto& edges : sd.edges) {
      w.u64(edges.size());
      for (const Edge& e : edges) {
        w.u32(e.src);
        w.u32(e.dst);
      }
    }
  }
  w.u64(g.movie_count());
  for (const auto& id : g.movie_ids) w.str(id);
  for (const auto& local : g.movie_local) write_ids(w, local);
  w.u64(g.review_count());
  for (std::size_t r = 0; r < g.review_count(); ++r) {
    w.str(g.review_ids[r]);
    w.u8(static_cast<std::uint8_t>(g.labels[r]));
    w.u8(static_cast<std::uint8_t>(g.splits[r]));
  }
  for (const auto& local : g.review_local) write_ids(w, local);
  return std::move(w.buffer());
}

HeteroGraph read_graph(bin::Reader& r) {
  HeteroGraph g;
  for (SubgraphId s : kSubgraphs) {
    auto& sd = g[s];
    g.active[index_of(s)] = r.u8() != 0;
    const std::uint64_t n = r.u64();
    if (n > r.remaining()) throw DataError("truncated snapshot");
    for (std::uint64_t i = 0; i < n; ++i) {
      const std::uint8_t t = r.u8();
      if (t > static_cast<std::uint8_t>(NodeType::Cast)) throw DataError("snapshot holds an unknown node type");
      sd.add_node(static_cast<NodeType>(t), r.str());
    }
    for (auto& edges : sd.edges) {
      const std::uint64_t m = r.u64();
      if (m > r.remaining() / 8) throw DataError("truncated snapshot");
      edges.resize(m);
      for (auto& e : edges) {
        e.src = r.u32();
        e.dst = r.u32();
      }
    }
  }
  const std::uint64_t movies = r.u64();
  if (movies > r.remaining()) throw DataError("truncated snapshot");
  for (std::uint64_t i = 0; i < movies; ++i) g.movie_ids.push_back(r.str());
  for (auto& local : g.movie_local) local = read_ids(r);
  const std::uint64_t reviews = r.u64();
  if (reviews > r.remaining()) throw DataError("truncated snapshot");
  for (std::uint64_t i = 0; i < reviews; ++i) {
    g.review_ids.push_back(r.str());
    g.labels.push_back(r.u8());
    const std::uint8_t split = r.u8();
    if (split > 2) throw DataError("snapshot holds an unknown split tag");
    g.splits.push_back(static_cast<Split>(split));
  }
  for (auto& local : g.review_local) local = read_ids(r);
  return g;
}

std::string feature_section(const FeatureTable& f) {
  bin::Writer w;
  for (const auto& per_sub : f.raw)
    for (const Tensor& t : per_sub) {
      w.u8(t.rank() == 0 ? 0 : 1);
      if (t.rank() != 0) w.tensor(t);
    }
  return std::move(w.buffer());
}

}  // namespace

void export_graph_snapshot(const HeteroGraph& g, const FeatureTable& feats, const std::filesystem::path& file) {
  validate_graph(g);
  const std::array<std::pair<std::uint32_t, std::string>, 2> sections = {
      std::pair{tag("GRPH"), graph_section(g)}, std::pair{tag("FEAT"), feature_section(feats)}};
  bin::Writer w;
  w.bytes(kMagic.data(), kMagic.size());
  w.u32(kSnapshotVersion);
  w.u32(static_cast<std::uint32_t>(sections.size()));
  std::uint64_t offset = 4 + 4 + 4 + sections.size() * (4 + 8 + 8);
  for (const auto& [t, body] : sections) {
    w.u32(t);
    w.u64(offset);
    w.u64(body.size());
    offset += body.size();
  }
  for (const auto& [t, body] : sections) w.bytes(body.data(), body.size());
  bin::write_file(file, w.buffer());
}

GraphSnapshot import_graph_snapshot(const std::filesystem::path& file) {
  const std::string data = bin::read_file(file);
  const std::string what = "snapshot " + file.string();
  bin::Reader head(data, what);
  std::string magic(4, '\0');
  head.bytes(magic.data(), 4);
  if (magic != kMagic) throw DataError(file.string() + " is not a graph snapshot");
  const std::uint32_t version = head.u32();
  if (version != kSnapshotVersion) {
    throw DataError(fmt::format("{}: snapshot version {} is not supported (expected {})", file.string(), version,
                                kSnapshotVersion));
  }
  const std::uint32_t count = head.u32();
  std::map<std::uint32_t, std::string_view> bodies;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t t = head.u32();
    const std::uint64_t offset = head.u64();
    const std::uint64_t length = head.u64();
    if (offset > data.size() || length > data.size() - offset) throw DataError("truncated " + what);
    bodies[t] = std::string_view(data).substr(offset, length);
  }
  for (const char* name : {"GRPH", "FEAT"}) {
    std::uint32_t t;
    std::memcpy(&t, name, 4);
    if (!bodies.count(t)) throw DataError(fmt::format("{} lacks the {} section", what, name));
  }
  GraphSnapshot snap;
  bin::Reader gr(bodies[tag("GRPH")], what);
  snap.graph = read_graph(gr);
  if (gr.remaining() != 0) throw DataError("corrupt graph section in " + what);
  bin::Reader fr(bodies[tag("FEAT")], what);
  for (auto& per_sub : snap.features.raw)
    for (Tensor& t : per_sub)
      if (fr.u8() != 0) t = fr.tensor();
  try {
    validate_graph(snap.graph);
  } catch (const std::logic_error& e) {
    throw DataError(what + " holds an invalid graph: " + e.what());
  }
  return snap;
}

}  // namespace mvsd
