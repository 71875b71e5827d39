#pragma once

#include <cstdint>
#include <filesystem>

#include "mvsd/features.hpp"
#include "mvsd/graph.hpp"

namespace mvsd {

inline constexpr std::uint32_t kSnapshotVersion = 1;

struct GraphSnapshot {
  HeteroGraph graph;
  FeatureTable features;
};

/// Container: "MVSG", u32 version, u32 section count, then a table of
/// (u32 tag, u64 offset, u64 length) entries followed by the section bodies.
/// Sections: "GRPH" (nodes, edges, registry, labels, splits) and "FEAT"
/// (raw feature matrices).
void export_graph_snapshot(const HeteroGraph& g, const FeatureTable& feats, const std::filesystem::path& file);
/// Throws DataError on bad magic, version mismatch, truncation or an invalid graph.
GraphSnapshot import_graph_snapshot(const std::filesystem::path& file);

}  // namespace mvsd
