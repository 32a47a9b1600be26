#include "dmasim/program.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace dmasim {

std::string to_string(CollectiveKind kind) {
  return kind == CollectiveKind::AllGather ? "allgather" : "alltoall";
}

std::optional<CollectiveKind> parse_collective(const std::string& name) {
  if (name == "allgather" || name == "ag") return CollectiveKind::AllGather;
  if (name == "alltoall" || name == "aa") return CollectiveKind::AllToAll;
  return std::nullopt;
}

std::string to_string(CommandKind kind) {
  switch (kind) {
    case CommandKind::Copy: return "copy";
    case CommandKind::Broadcast: return "broadcast";
    case CommandKind::Swap: return "swap";
    case CommandKind::AtomicSignal: return "signal";
    case CommandKind::Poll: return "poll";
    case CommandKind::Timestamp: return "timestamp";
  }
  return "?";
}

void validate_spec(const CollectiveSpec& spec) {
  if (spec.chunk_size <= 0)
    throw std::invalid_argument("collective: chunk size must be positive");
  if (spec.gpu_count < 2)
    throw std::invalid_argument("collective: gpu_count must be >= 2");
  if (spec.kind == CollectiveKind::AllGather && spec.in_place)
    throw std::invalid_argument("collective: allgather forbids in_place");
}

MetricsReport static_metrics(const CommandProgram& program) {
  MetricsReport report;
  for (const auto& queue : program.queues) {
    if (queue.commands.empty()) continue;
    GpuMetrics& gpu = report.per_gpu[queue.engine.gpu];
    gpu.engines_used += 1;
    gpu.doorbells += queue.doorbell_count;
    report.engines_used += 1;
    report.doorbells += queue.doorbell_count;
    for (const auto& cmd : queue.commands) {
      if (cmd.is_data_movement()) {
        report.data_commands += 1;
        gpu.data_commands += 1;
      } else if (cmd.kind == CommandKind::AtomicSignal) {
        report.sync_commands += 1;
        gpu.sync_commands += 1;
      } else if (cmd.kind == CommandKind::Poll) {
        report.poll_commands += 1;
        gpu.poll_commands += 1;
      } else if (cmd.kind == CommandKind::Timestamp) {
        report.timestamp_commands += 1;
      }
    }
  }
  return report;
}

namespace {

std::int64_t declared_length(const CollectiveSpec& spec, BufferId buffer) {
  return buffer == BufferId::Input ? spec.input_bytes() : spec.output_bytes();
}

bool regions_overlap(const BufferRef& a, const BufferRef& b) {
  if (a.gpu != b.gpu || a.buffer != b.buffer) return false;
  return a.offset < b.offset + b.length && b.offset < a.offset + a.length;
}

ValidationResult fail(std::string message, int queue = -1, int command = -1) {
  ValidationResult result;
  result.ok = false;
  result.violation = Violation{std::move(message), queue, command};
  return result;
}

ValidationResult check_region(const BufferRef& ref, const CollectiveSpec& spec,
                              int q, int c) {
  if (ref.gpu < 0 || ref.gpu >= spec.gpu_count)
    return fail("buffer ref on unknown gpu", q, c);
  if (ref.offset < 0 || ref.length <= 0)
    return fail("buffer region must have positive length", q, c);
  if (ref.offset + ref.length > declared_length(spec, ref.buffer))
    return fail("buffer region out of declared bounds", q, c);
  return {};
}

}  // namespace

ValidationResult validate_program(const CommandProgram& program,
                                  const NodeTopology& topo) {
  const CollectiveSpec& spec = program.metadata.spec;
  std::set<EngineId> engines_seen;
  std::map<GpuId, int> engines_per_gpu;
  std::set<int> trailing_signals;
  std::set<int> poll_slots;

  for (size_t qi = 0; qi < program.queues.size(); ++qi) {
    const CommandQueue& queue = program.queues[qi];
    const int q = static_cast<int>(qi);
    if (queue.engine.gpu < 0 || queue.engine.gpu >= topo.gpu_count)
      return fail("queue on unknown gpu", q);
    if (queue.engine.local < 0 || queue.engine.local >= topo.engines_per_gpu)
      return fail("engine overflow: local index exceeds engines_per_gpu", q);
    if (!engines_seen.insert(queue.engine).second)
      return fail("two queues share one engine", q);
    if (queue.commands.empty()) continue;
    if (++engines_per_gpu[queue.engine.gpu] > topo.engines_per_gpu)
      return fail("engine overflow: too many engines used on one gpu", q);
    if (queue.doorbell_count < 1)
      return fail("unrung queue: doorbell_count must be >= 1", q);

    bool saw_data = false;
    int signal_count = 0;
    for (size_t ci = 0; ci < queue.commands.size(); ++ci) {
      const DmaCommand& cmd = queue.commands[ci];
      const int c = static_cast<int>(ci);
      switch (cmd.kind) {
        case CommandKind::Copy: {
          if (cmd.size <= 0) return fail("copy with nonpositive size", q, c);
          if (cmd.src.length != cmd.size || cmd.dst.length != cmd.size)
            return fail("copy src/dst size mismatch", q, c);
          if (cmd.src == cmd.dst)
            return fail("copy src and dst must be distinct regions", q, c);
          if (regions_overlap(cmd.src, cmd.dst))
            return fail("copy src and dst overlap", q, c);
          for (const BufferRef* r : {&cmd.src, &cmd.dst})
            if (auto v = check_region(*r, spec, q, c); !v.ok) return v;
          saw_data = true;
          break;
        }
        case CommandKind::Broadcast: {
          if (cmd.size <= 0)
            return fail("broadcast with nonpositive size", q, c);
          if (cmd.src.length != cmd.size || cmd.dst.length != cmd.size ||
              cmd.dst2.length != cmd.size)
            return fail("broadcast region size mismatch", q, c);
          if (cmd.dst.gpu == cmd.dst2.gpu)
            return fail("broadcast destinations must be on distinct gpus", q, c);
          for (const BufferRef* r : {&cmd.src, &cmd.dst, &cmd.dst2})
            if (auto v = check_region(*r, spec, q, c); !v.ok) return v;
          saw_data = true;
          break;
        }
        case CommandKind::Swap: {
          if (cmd.size <= 0) return fail("swap with nonpositive size", q, c);
          if (cmd.src.length != cmd.size || cmd.peer.length != cmd.size)
            return fail("swap region size mismatch", q, c);
          if (cmd.src.gpu == cmd.peer.gpu)
            return fail("swap regions must be on distinct gpus", q, c);
          for (const BufferRef* r : {&cmd.src, &cmd.peer})
            if (auto v = check_region(*r, spec, q, c); !v.ok) return v;
          saw_data = true;
          break;
        }
        case CommandKind::AtomicSignal: {
          if (cmd.signal_target < 0)
            return fail("signal without a target slot", q, c);
          ++signal_count;
          break;
        }
        case CommandKind::Poll: {
          if (cmd.poll_slot < 0) return fail("poll without a slot", q, c);
          if (saw_data)
            return fail("poll must precede the commands it gates", q, c);
          poll_slots.insert(cmd.poll_slot);
          break;
        }
        case CommandKind::Timestamp:
          break;
      }
    }
    if (saw_data) {
      if (signal_count != 1 ||
          queue.commands.back().kind != CommandKind::AtomicSignal)
        return fail("unsignaled queue: data queue must end with exactly one "
                    "AtomicSignal",
                    q);
      trailing_signals.insert(queue.commands.back().signal_target);
    }
  }

  std::set<int> declared_signals(program.completion_signals.begin(),
                                 program.completion_signals.end());
  if (declared_signals != trailing_signals)
    return fail("completion_signals do not match trailing signal targets");
  const bool prelaunched = program.metadata.prelaunched;
  if (prelaunched && program.trigger_slots.empty())
    return fail("prelaunched program without trigger slots");
  if (!prelaunched && !program.trigger_slots.empty())
    return fail("trigger slots on a non-prelaunched program");
  std::set<int> declared_triggers(program.trigger_slots.begin(),
                                  program.trigger_slots.end());
  if (declared_triggers != poll_slots)
    return fail("trigger_slots do not match the poll slots used");
  return {};
}

namespace {

std::string ref_str(const BufferRef& r) {
  std::ostringstream out;
  out << "g" << r.gpu << (r.buffer == BufferId::Input ? ".in[" : ".out[")
      << r.offset << "+" << r.length << "]";
  return out.str();
}

}  // namespace

std::string dump_program(const CommandProgram& program) {
  // Queues are already held in stable (gpu, engine, ordinal) order.
  std::ostringstream out;
  for (size_t qi = 0; qi < program.queues.size(); ++qi) {
    const CommandQueue& queue = program.queues[qi];
    for (size_t ci = 0; ci < queue.commands.size(); ++ci) {
      const DmaCommand& cmd = queue.commands[ci];
      out << "q" << qi << "(g" << queue.engine.gpu << "e" << queue.engine.local
          << ")\t" << ci << "\t" << to_string(cmd.kind) << "\t";
      switch (cmd.kind) {
        case CommandKind::Copy:
          out << ref_str(cmd.src) << "\t" << ref_str(cmd.dst) << "\t"
              << cmd.size << "\t-";
          break;
        case CommandKind::Broadcast:
          out << ref_str(cmd.src) << "\t" << ref_str(cmd.dst) << ","
              << ref_str(cmd.dst2) << "\t" << cmd.size << "\t-";
          break;
        case CommandKind::Swap:
          out << ref_str(cmd.src) << "\t" << ref_str(cmd.peer) << "\t"
              << cmd.size << "\t-";
          break;
        case CommandKind::AtomicSignal:
          out << "-\t-\t0\t" << cmd.signal_target;
          break;
        case CommandKind::Poll:
          out << "-\t-\t0\t" << cmd.poll_slot;
          break;
        case CommandKind::Timestamp:
          out << "-\t-\t0\t-";
          break;
      }
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace dmasim
