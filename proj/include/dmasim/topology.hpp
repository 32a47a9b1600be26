#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>

namespace dmasim {

using GpuId = int;

struct EngineId {
  GpuId gpu = 0;
  int local = 0;  // index within the GPU, < engines_per_gpu

  friend bool operator==(const EngineId&, const EngineId&) = default;
  friend auto operator<=>(const EngineId&, const EngineId&) = default;
};

struct LinkId {
  GpuId src = 0;
  GpuId dst = 0;  // src != dst

  friend bool operator==(const LinkId&, const LinkId&) = default;
  friend auto operator<=>(const LinkId&, const LinkId&) = default;
};

/// A fully connected multi-GPU node: every ordered GPU pair (i,j), i!=j,
/// has a directed link. Each DMA engine may drive any link. Immutable
/// after construction.
struct NodeTopology {
  int gpu_count = 8;
  int engines_per_gpu = 16;
  double link_bandwidth = 64e9;          // bytes/s per directed link
  double engine_throughput_cap = 104e9;  // bytes/s aggregate per engine
  int host_count = 1;

  int link_count() const { return gpu_count * (gpu_count - 1); }
  double aggregate_egress() const { return (gpu_count - 1) * link_bandwidth; }
};

/// Builds and validates a topology. `overrides` may carry any of the
/// config-file keys below; unknown keys are rejected.
NodeTopology build_topology(int gpu_count,
                            const std::map<std::string, std::string>& overrides = {});

void validate_topology(const NodeTopology& topo);

// Key/value text config. Keys: gpu_count, engines_per_gpu,
// link_bandwidth_bytes_per_s, engine_throughput_cap_bytes_per_s.
NodeTopology load_topology(std::istream& in);
NodeTopology load_topology_file(const std::string& path);
std::string serialize_topology(const NodeTopology& topo);

}  // namespace dmasim
