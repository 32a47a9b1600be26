#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dmasim/topology.hpp"

namespace dmasim {

enum class CollectiveKind { AllGather, AllToAll };

std::string to_string(CollectiveKind kind);
std::optional<CollectiveKind> parse_collective(const std::string& name);

/// A collective instance. `chunk_size` is the per-peer transfer size s in
/// bytes (the "message size" axis for one-shot collectives).
struct CollectiveSpec {
  CollectiveKind kind = CollectiveKind::AllGather;
  std::int64_t chunk_size = 0;  // s, bytes per peer-to-peer transfer
  int gpu_count = 8;            // n
  bool in_place = false;        // AllToAll swap only

  std::int64_t input_bytes() const {
    return kind == CollectiveKind::AllGather ? chunk_size
                                             : chunk_size * gpu_count;
  }
  std::int64_t output_bytes() const { return chunk_size * gpu_count; }
};

void validate_spec(const CollectiveSpec& spec);

// Symbolic buffer ids within a GPU.
enum class BufferId : int { Input = 0, Output = 1 };

struct BufferRef {
  GpuId gpu = 0;
  BufferId buffer = BufferId::Input;
  std::int64_t offset = 0;  // bytes
  std::int64_t length = 0;  // bytes

  friend bool operator==(const BufferRef&, const BufferRef&) = default;
};

enum class CommandKind { Copy, Broadcast, Swap, AtomicSignal, Poll, Timestamp };

std::string to_string(CommandKind kind);

struct DmaCommand {
  CommandKind kind = CommandKind::Copy;
  BufferRef src;               // Copy/Broadcast/Swap
  BufferRef dst;               // Copy; Broadcast first destination
  BufferRef dst2;              // Broadcast second destination
  BufferRef peer;              // Swap second location
  std::int64_t size = 0;       // bytes, data-movement commands
  int signal_target = -1;      // host memory slot id (AtomicSignal)
  int poll_slot = -1;          // Poll
  std::uint64_t expected_value = 0;  // Poll

  bool is_data_movement() const {
    return kind == CommandKind::Copy || kind == CommandKind::Broadcast ||
           kind == CommandKind::Swap;
  }
};

struct CommandQueue {
  EngineId engine;
  std::vector<DmaCommand> commands;
  int doorbell_count = 0;  // one doorbell releases the whole batch
};

struct ProgramMetadata {
  std::string implementation;  // pcpy, bcst, swap, b2b, prelaunch_*
  CollectiveSpec spec;
  bool prelaunched = false;
};

/// A complete compiled collective: per-engine queues plus the host-side
/// signal/trigger slot sets. Immutable value after compilation.
struct CommandProgram {
  std::vector<CommandQueue> queues;  // ordered by (gpu, engine local index)
  std::vector<int> completion_signals;
  std::vector<int> trigger_slots;  // nonempty iff prelaunched
  ProgramMetadata metadata;
};

struct GpuMetrics {
  int data_commands = 0;
  int sync_commands = 0;
  int poll_commands = 0;
  int engines_used = 0;
  int doorbells = 0;
};

struct MetricsReport {
  int data_commands = 0;
  int sync_commands = 0;
  int poll_commands = 0;
  int timestamp_commands = 0;
  int engines_used = 0;
  int doorbells = 0;
  std::map<GpuId, GpuMetrics> per_gpu;
};

/// Pure counting over a valid program; invariant under queue reordering.
MetricsReport static_metrics(const CommandProgram& program);

struct Violation {
  std::string message;
  int queue_index = -1;    // -1: program-level
  int command_index = -1;  // -1: queue-level
};

struct ValidationResult {
  bool ok = true;
  std::optional<Violation> violation;  // first violation found
};

/// Checks every structural invariant of the program against the topology.
/// Returns the first violation rather than throwing.
ValidationResult validate_program(const CommandProgram& program,
                                  const NodeTopology& topo);

/// One line per command, tab-separated, stably ordered by GPU, engine
/// index, ordinal (the --dump-program format).
std::string dump_program(const CommandProgram& program);

}  // namespace dmasim
