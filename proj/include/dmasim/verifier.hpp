#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dmasim/program.hpp"

namespace dmasim {

enum class VerdictKind { Ok, Mismatch, Hazard, Invalid };

struct Verdict {
  VerdictKind kind = VerdictKind::Ok;
  std::string detail;  // first mismatch/hazard found

  bool ok() const { return kind == VerdictKind::Ok; }
};

struct VerifyOptions {
  // Exhaustive interleavings when the data-command count is at most this;
  // otherwise `random_interleavings` seeded shuffles of a legal order.
  int exhaustive_limit = 8;
  int random_interleavings = 1000;
  std::uint64_t seed = 0;
};

/// Symbolically executes the program's data movement over chunk-labeled
/// buffers under many dependency-respecting orders and checks the
/// collective postcondition (AllGather: every output slot k holds a label
/// originating at GPU k; AllToAll: GPU j's slot i holds chunk (i,j)).
/// Reads of a region already overwritten with a different label yield a
/// hazard verdict; the two-sided exchange inside a single Swap is exempt.
Verdict verify_collective(const CommandProgram& program,
                          const CollectiveSpec& spec,
                          const VerifyOptions& options = {});

struct GpuTraffic {
  std::int64_t hbm_read_bytes = 0;
  std::int64_t hbm_write_bytes = 0;
};

struct TrafficReport {
  std::map<GpuId, GpuTraffic> per_gpu;
  std::map<LinkId, std::int64_t> link_bytes;
  std::int64_t total_read_bytes = 0;
  std::int64_t total_write_bytes = 0;
  std::int64_t total_link_bytes = 0;
};

/// Pure traffic accounting. Copy: one read at src GPU, one write at dst.
/// Broadcast: one read, two writes, both links charged. Swap: one read and
/// one write per side.
TrafficReport account_traffic(const CommandProgram& program);

}  // namespace dmasim
