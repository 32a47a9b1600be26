#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dmasim/program.hpp"
#include "dmasim/topology.hpp"

namespace dmasim {

enum class Implementation {
  Pcpy,
  Bcst,
  Swap,
  B2b,
  PrelaunchPcpy,
  PrelaunchBcst,
  PrelaunchSwap,
  PrelaunchB2b,
};

std::string to_string(Implementation impl);
std::optional<Implementation> parse_implementation(const std::string& name);
bool is_prelaunched(Implementation impl);
Implementation base_of(Implementation impl);           // strips prelaunch
Implementation prelaunch_of(Implementation impl);      // adds prelaunch
bool valid_for(Implementation impl, CollectiveKind kind);

/// Implementations applicable to a collective kind, base variants first.
std::vector<Implementation> implementations_for(CollectiveKind kind);

// One copy per peer pair, each on its own engine with its own signal.
// Needs engines_per_gpu >= n-1.
CommandProgram compile_pcpy(const CollectiveSpec& spec, const NodeTopology& topo);

// AllGather only. Per GPU: floor((n-1)/2) broadcasts plus one copy when n
// is even. GPU i's k-th broadcast targets peers (i+2k+1)%n and (i+2k+2)%n;
// the even-n leftover copy targets (i+n-1)%n.
CommandProgram compile_bcst(const CollectiveSpec& spec, const NodeTopology& topo);

// AllToAll only, in-place. One swap per unordered pair; pair (i,j), i<j is
// issued by i if j-i <= n/2, else by j.
CommandProgram compile_swap(const CollectiveSpec& spec, const NodeTopology& topo);

// One queue per GPU (engine 0) holding n-1 back-to-back copies and a
// single signal; one doorbell per queue.
CommandProgram compile_b2b(const CollectiveSpec& spec, const NodeTopology& topo);

/// Prepends a Poll on a unique trigger slot to every nonempty queue and
/// marks the program prelaunched. Rejects double prelaunch.
CommandProgram apply_prelaunch(const CommandProgram& program);

/// Dispatches to the right compile_* (and apply_prelaunch when asked).
CommandProgram compile(Implementation impl, const CollectiveSpec& spec,
                       const NodeTopology& topo);

/// The prescribed best implementation for a message size
/// (per-collective step function over [1KB, +inf)). Rejects size < 1KB.
Implementation select_implementation(CollectiveKind kind, std::int64_t size);

}  // namespace dmasim
