#include "dmasim/compiler.hpp"

#include <algorithm>
#include <map>

namespace dmasim {

std::string to_string(Implementation impl) {
  switch (impl) {
    case Implementation::Pcpy: return "pcpy";
    case Implementation::Bcst: return "bcst";
    case Implementation::Swap: return "swap";
    case Implementation::B2b: return "b2b";
    case Implementation::PrelaunchPcpy: return "prelaunch_pcpy";
    case Implementation::PrelaunchBcst: return "prelaunch_bcst";
    case Implementation::PrelaunchSwap: return "prelaunch_swap";
    case Implementation::PrelaunchB2b: return "prelaunch_b2b";
  }
  return "?";
}

std::optional<Implementation> parse_implementation(const std::string& name) {
  static const std::map<std::string, Implementation> table = {
      {"pcpy", Implementation::Pcpy},
      {"baseline", Implementation::Pcpy},
      {"bcst", Implementation::Bcst},
      {"swap", Implementation::Swap},
      {"b2b", Implementation::B2b},
      {"prelaunch_pcpy", Implementation::PrelaunchPcpy},
      {"prelaunch_bcst", Implementation::PrelaunchBcst},
      {"prelaunch_swap", Implementation::PrelaunchSwap},
      {"prelaunch_b2b", Implementation::PrelaunchB2b},
  };
  auto it = table.find(name);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

bool is_prelaunched(Implementation impl) {
  switch (impl) {
    case Implementation::PrelaunchPcpy:
    case Implementation::PrelaunchBcst:
    case Implementation::PrelaunchSwap:
    case Implementation::PrelaunchB2b:
      return true;
    default:
      return false;
  }
}

Implementation base_of(Implementation impl) {
  switch (impl) {
    case Implementation::PrelaunchPcpy: return Implementation::Pcpy;
    case Implementation::PrelaunchBcst: return Implementation::Bcst;
    case Implementation::PrelaunchSwap: return Implementation::Swap;
    case Implementation::PrelaunchB2b: return Implementation::B2b;
    default: return impl;
  }
}

Implementation prelaunch_of(Implementation impl) {
  switch (base_of(impl)) {
    case Implementation::Pcpy: return Implementation::PrelaunchPcpy;
    case Implementation::Bcst: return Implementation::PrelaunchBcst;
    case Implementation::Swap: return Implementation::PrelaunchSwap;
    default: return Implementation::PrelaunchB2b;
  }
}

bool valid_for(Implementation impl, CollectiveKind kind) {
  Implementation base = base_of(impl);
  if (base == Implementation::Bcst) return kind == CollectiveKind::AllGather;
  if (base == Implementation::Swap) return kind == CollectiveKind::AllToAll;
  return true;
}

std::vector<Implementation> implementations_for(CollectiveKind kind) {
  if (kind == CollectiveKind::AllGather)
    return {Implementation::Pcpy,          Implementation::Bcst,
            Implementation::B2b,           Implementation::PrelaunchPcpy,
            Implementation::PrelaunchBcst, Implementation::PrelaunchB2b};
  return {Implementation::Pcpy,          Implementation::Swap,
          Implementation::B2b,           Implementation::PrelaunchPcpy,
          Implementation::PrelaunchSwap, Implementation::PrelaunchB2b};
}

namespace {

constexpr int kTriggerSlotBase = 100000;

// Queues are built per GPU in ascending engine order, so the program order
// is the stable (gpu, engine, ordinal) order used everywhere else.
struct Builder {
  CommandProgram program;
  std::map<GpuId, int> next_engine;
  int next_signal = 0;

  CommandQueue& open_queue(GpuId gpu) {
    CommandQueue queue;
    queue.engine = EngineId{gpu, next_engine[gpu]++};
    queue.doorbell_count = 1;
    program.queues.push_back(std::move(queue));
    return program.queues.back();
  }

  void seal_queue(CommandQueue& queue) {
    DmaCommand sig;
    sig.kind = CommandKind::AtomicSignal;
    sig.signal_target = next_signal++;
    queue.commands.push_back(sig);
    program.completion_signals.push_back(sig.signal_target);
  }
};

BufferRef ag_src(const CollectiveSpec& spec, GpuId gpu) {
  return {gpu, BufferId::Input, 0, spec.chunk_size};
}

BufferRef out_slot(const CollectiveSpec& spec, GpuId gpu, int slot) {
  BufferId buffer = spec.in_place ? BufferId::Input : BufferId::Output;
  return {gpu, buffer, slot * spec.chunk_size, spec.chunk_size};
}

BufferRef aa_src(const CollectiveSpec& spec, GpuId gpu, int chunk) {
  return {gpu, BufferId::Input, chunk * spec.chunk_size, spec.chunk_size};
}

DmaCommand make_copy(BufferRef src, BufferRef dst, std::int64_t size) {
  DmaCommand cmd;
  cmd.kind = CommandKind::Copy;
  cmd.src = src;
  cmd.dst = dst;
  cmd.size = size;
  return cmd;
}

}  // namespace

CommandProgram compile_pcpy(const CollectiveSpec& spec,
                            const NodeTopology& topo) {
  validate_spec(spec);
  if (spec.in_place)
    throw std::invalid_argument("pcpy compiles out-of-place only");
  if (topo.engines_per_gpu < spec.gpu_count - 1)
    throw std::invalid_argument("pcpy needs n-1 engines per gpu");
  const int n = spec.gpu_count;
  Builder b;
  for (GpuId i = 0; i < n; ++i) {
    for (int d = 1; d < n; ++d) {
      const GpuId j = (i + d) % n;
      CommandQueue& queue = b.open_queue(i);
      if (spec.kind == CollectiveKind::AllGather) {
        queue.commands.push_back(
            make_copy(ag_src(spec, i), out_slot(spec, j, i), spec.chunk_size));
      } else {
        queue.commands.push_back(
            make_copy(aa_src(spec, i, j), out_slot(spec, j, i), spec.chunk_size));
      }
      b.seal_queue(queue);
    }
  }
  b.program.metadata = {to_string(Implementation::Pcpy), spec, false};
  return std::move(b.program);
}

CommandProgram compile_bcst(const CollectiveSpec& spec,
                            const NodeTopology& topo) {
  validate_spec(spec);
  if (spec.kind != CollectiveKind::AllToAll &&
      spec.kind != CollectiveKind::AllGather) {
    throw std::invalid_argument("unknown collective kind");
  }
  if (spec.kind == CollectiveKind::AllToAll)
    throw std::invalid_argument("bcst applies to allgather only");
  const int n = spec.gpu_count;
  const int broadcasts = (n - 1) / 2;
  const bool leftover_copy = (n % 2) == 0;
  if (topo.engines_per_gpu < broadcasts + (leftover_copy ? 1 : 0))
    throw std::invalid_argument("bcst needs ceil((n-1)/2) engines per gpu");
  Builder b;
  for (GpuId i = 0; i < n; ++i) {
    for (int k = 0; k < broadcasts; ++k) {
      const GpuId p1 = (i + 2 * k + 1) % n;
      const GpuId p2 = (i + 2 * k + 2) % n;
      CommandQueue& queue = b.open_queue(i);
      DmaCommand cmd;
      cmd.kind = CommandKind::Broadcast;
      cmd.src = ag_src(spec, i);
      cmd.dst = out_slot(spec, p1, i);
      cmd.dst2 = out_slot(spec, p2, i);
      cmd.size = spec.chunk_size;
      queue.commands.push_back(cmd);
      b.seal_queue(queue);
    }
    if (leftover_copy) {
      const GpuId p = (i + n - 1) % n;
      CommandQueue& queue = b.open_queue(i);
      queue.commands.push_back(
          make_copy(ag_src(spec, i), out_slot(spec, p, i), spec.chunk_size));
      b.seal_queue(queue);
    }
  }
  b.program.metadata = {to_string(Implementation::Bcst), spec, false};
  return std::move(b.program);
}

CommandProgram compile_swap(const CollectiveSpec& spec,
                            const NodeTopology& topo) {
  CollectiveSpec local = spec;
  local.in_place = true;  // swap exchanges within the in-place buffer
  validate_spec(local);
  if (local.kind != CollectiveKind::AllToAll)
    throw std::invalid_argument("swap applies to alltoall only");
  const int n = local.gpu_count;
  // Balanced ownership: each GPU issues ceil((n-1)/2) or floor((n-1)/2).
  std::map<GpuId, std::vector<GpuId>> owned;
  for (GpuId i = 0; i < n; ++i)
    for (GpuId j = i + 1; j < n; ++j) {
      const GpuId owner = (j - i) <= n / 2 ? i : j;
      owned[owner].push_back(owner == i ? j : i);
    }
  if (topo.engines_per_gpu < (n - 1 + 1) / 2)
    throw std::invalid_argument("swap needs ceil((n-1)/2) engines per gpu");
  Builder b;
  for (GpuId g = 0; g < n; ++g) {
    for (GpuId peer : owned[g]) {
      CommandQueue& queue = b.open_queue(g);
      DmaCommand cmd;
      cmd.kind = CommandKind::Swap;
      cmd.src = aa_src(local, g, peer);
      cmd.peer = aa_src(local, peer, g);
      cmd.size = local.chunk_size;
      queue.commands.push_back(cmd);
      b.seal_queue(queue);
    }
  }
  b.program.metadata = {to_string(Implementation::Swap), local, false};
  return std::move(b.program);
}

CommandProgram compile_b2b(const CollectiveSpec& spec,
                           const NodeTopology& topo) {
  validate_spec(spec);
  if (spec.in_place)
    throw std::invalid_argument("b2b compiles out-of-place only");
  (void)topo;  // one engine per GPU always fits
  const int n = spec.gpu_count;
  Builder b;
  for (GpuId i = 0; i < n; ++i) {
    CommandQueue& queue = b.open_queue(i);
    for (int d = 1; d < n; ++d) {
      const GpuId j = (i + d) % n;
      if (spec.kind == CollectiveKind::AllGather) {
        queue.commands.push_back(
            make_copy(ag_src(spec, i), out_slot(spec, j, i), spec.chunk_size));
      } else {
        queue.commands.push_back(
            make_copy(aa_src(spec, i, j), out_slot(spec, j, i), spec.chunk_size));
      }
    }
    b.seal_queue(queue);
  }
  b.program.metadata = {to_string(Implementation::B2b), spec, false};
  return std::move(b.program);
}

CommandProgram apply_prelaunch(const CommandProgram& program) {
  if (program.metadata.prelaunched)
    throw std::invalid_argument("program is already prelaunched");
  CommandProgram out = program;
  int slot = kTriggerSlotBase;
  for (auto& queue : out.queues) {
    if (queue.commands.empty()) continue;
    DmaCommand poll;
    poll.kind = CommandKind::Poll;
    poll.poll_slot = slot++;
    poll.expected_value = 1;
    queue.commands.insert(queue.commands.begin(), poll);
    out.trigger_slots.push_back(poll.poll_slot);
  }
  out.metadata.prelaunched = true;
  if (out.metadata.implementation.rfind("prelaunch_", 0) != 0)
    out.metadata.implementation = "prelaunch_" + out.metadata.implementation;
  return out;
}

CommandProgram compile(Implementation impl, const CollectiveSpec& spec,
                       const NodeTopology& topo) {
  if (!valid_for(impl, spec.kind))
    throw std::invalid_argument(to_string(impl) + " does not apply to " +
                                to_string(spec.kind));
  CollectiveSpec local = spec;
  local.in_place = base_of(impl) == Implementation::Swap;
  CommandProgram program;
  switch (base_of(impl)) {
    case Implementation::Pcpy: program = compile_pcpy(local, topo); break;
    case Implementation::Bcst: program = compile_bcst(local, topo); break;
    case Implementation::Swap: program = compile_swap(local, topo); break;
    default: program = compile_b2b(local, topo); break;
  }
  if (is_prelaunched(impl)) program = apply_prelaunch(program);
  return program;
}

Implementation select_implementation(CollectiveKind kind, std::int64_t size) {
  if (size < (1ll << 10))
    throw std::invalid_argument("select_implementation: size below 1KB");
  if (kind == CollectiveKind::AllGather) {
    if (size < (256ll << 10)) return Implementation::PrelaunchB2b;
    if (size < (1ll << 20)) return Implementation::PrelaunchBcst;
    if (size < (512ll << 20)) return Implementation::PrelaunchPcpy;
    return Implementation::Pcpy;
  }
  if (size < (64ll << 10)) return Implementation::PrelaunchB2b;
  if (size < (4ll << 20)) return Implementation::PrelaunchSwap;
  if (size < (1ll << 30)) return Implementation::PrelaunchPcpy;
  return Implementation::Pcpy;
}

}  // namespace dmasim
