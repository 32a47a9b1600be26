#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dmasim/compiler.hpp"
#include "dmasim/cost_model.hpp"
#include "dmasim/sim.hpp"
#include "dmasim/topology.hpp"

namespace dmasim {

struct SweepConfig {
  CollectiveKind kind = CollectiveKind::AllGather;
  std::vector<Implementation> implementations;  // empty: all valid for kind
  std::int64_t size_start = 1ll << 10;
  std::int64_t size_end = 4ll << 30;
  double size_step = 2.0;  // multiplicative, > 1
  int gpu_count = 8;
  std::uint64_t seed = 0;
  int jobs = 1;
  // Verification budget per sweep point (full budget lives in the tests).
  int verify_interleavings = 8;
};

void validate_sweep_config(const SweepConfig& config);

struct SweepRow {
  Implementation impl;
  CollectiveKind kind;
  int gpus = 0;
  std::int64_t size_bytes = 0;
  Timeline timeline;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // deterministic order: impl-major, size-minor
  std::string csv;             // byte-stable given identical config+seed
  std::string summary;         // per-size best impl + geomean speedups
};

/// compile -> verify -> simulate for every (impl, size); any verification
/// failure throws with the verdict.
SweepResult run_sweep(const SweepConfig& config, const NodeTopology& topo,
                      const CostModel& cost);

struct SelectionRange {
  std::int64_t lo = 0;  // inclusive
  std::int64_t hi = 0;  // exclusive; 0 means open-ended
  Implementation simulated;
  Implementation prescribed;
  bool match = false;
};

struct SelectionTable {
  std::vector<SelectionRange> ranges;
  bool degenerate = false;  // all implementations tie (e.g. fluid limit)
  bool all_match = false;
  std::string rendered;  // side-by-side text table
};

/// Simulated per-size winner over the binary grid [1KB, 4GB], compared
/// with the prescribed step function. Within a candidate size, a
/// non-prelaunched variant wins when prelaunch gains less than the cost
/// model's prelaunch_gain_threshold.
SelectionTable selection_table(CollectiveKind kind, int gpus,
                               const NodeTopology& topo, const CostModel& cost);

struct WinnerGrid {
  std::vector<std::int64_t> sizes;          // binary grid
  std::vector<Implementation> winners;
};

/// Simulated winner per size among the selection-table candidates
/// (prelaunch_b2b, prelaunch_bcst|swap, prelaunch_pcpy, pcpy), applying
/// the prelaunch gain threshold.
WinnerGrid winner_grid(CollectiveKind kind, int gpus, const NodeTopology& topo,
                       const CostModel& cost,
                       std::int64_t size_lo = 1ll << 10,
                       std::int64_t size_hi = 4ll << 30);

/// First grid size at which the winner switches from `from` to `to`;
/// nullopt when that transition never happens.
std::optional<std::int64_t> boundary_between(const WinnerGrid& grid,
                                             Implementation from,
                                             Implementation to);

struct OverlayRow {
  std::string collective;
  std::int64_t size_bytes = 0;
  std::string impl;
  double total_ns = 0;
  double reference_ns = 0;
  double ratio = 0;
};

struct OverlayResult {
  std::vector<OverlayRow> rows;
  std::vector<std::string> warnings;  // unmatched keys, per row
  std::string csv;
};

/// Joins a sweep CSV with a user reference CSV (columns collective,
/// size_bytes,total_ns) on (collective, size); adds ratio columns.
OverlayResult overlay_reference(const std::string& sweep_csv,
                                const std::string& reference_csv);

/// Parses "512K", "4M", "1G" (binary suffixes) or plain byte counts.
std::int64_t parse_size(const std::string& text);

}  // namespace dmasim
