#include "dmasim/verifier.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

namespace dmasim {
namespace {

struct Label {
  int origin = -1;
  int chunk = -1;

  bool valid() const { return origin >= 0; }
  friend bool operator==(const Label&, const Label&) = default;
};

struct Slot {
  Label label;
  Label initial;
  bool written = false;
};

// Chunk-labeled buffers. in_place collectives alias Output onto Input.
struct SymbolicState {
  const CollectiveSpec& spec;
  std::vector<std::vector<Slot>> input;   // [gpu][chunk]
  std::vector<std::vector<Slot>> output;  // [gpu][slot]; empty if aliased

  explicit SymbolicState(const CollectiveSpec& s) : spec(s) {
    const int n = spec.gpu_count;
    input.resize(n);
    if (!spec.in_place) output.resize(n);
    for (int g = 0; g < n; ++g) {
      const int in_chunks = spec.kind == CollectiveKind::AllGather ? 1 : n;
      for (int c = 0; c < in_chunks; ++c)
        input[g].push_back({Label{g, c}, Label{g, c}, false});
      if (!spec.in_place) {
        output[g].assign(n, Slot{});
        // The local chunk lands in its own output slot by a zero-cost
        // local placement; flagged so reports can call it out.
        Label local{g, spec.kind == CollectiveKind::AllGather ? 0 : g};
        output[g][g] = Slot{local, local, false};
      }
    }
  }

  std::vector<Slot>& buffer(GpuId gpu, BufferId id) {
    if (spec.in_place || id == BufferId::Input) return input[gpu];
    return output[gpu];
  }
};

struct RegionChunks {
  GpuId gpu;
  BufferId buffer;
  int first = 0;
  int count = 0;
};

bool region_chunks(const BufferRef& ref, std::int64_t chunk_size,
                   RegionChunks& out) {
  if (ref.offset % chunk_size != 0 || ref.length % chunk_size != 0)
    return false;  // commands never split chunks
  out = {ref.gpu, ref.buffer, static_cast<int>(ref.offset / chunk_size),
         static_cast<int>(ref.length / chunk_size)};
  return true;
}

struct Executor {
  SymbolicState state;
  std::string error;

  explicit Executor(const CollectiveSpec& spec) : state(spec) {}

  bool read(const RegionChunks& r, std::vector<Label>& out, int queue,
            int command) {
    auto& buf = state.buffer(r.gpu, r.buffer);
    for (int c = r.first; c < r.first + r.count; ++c) {
      const Slot& slot = buf[c];
      if (slot.written && !(slot.label == slot.initial)) {
        std::ostringstream msg;
        msg << "hazard: queue " << queue << " command " << command
            << " reads gpu " << r.gpu << " chunk " << c
            << " already overwritten";
        error = msg.str();
        return false;
      }
      out.push_back(slot.label);
    }
    return true;
  }

  void write(const RegionChunks& r, const std::vector<Label>& labels) {
    auto& buf = state.buffer(r.gpu, r.buffer);
    for (int c = 0; c < r.count; ++c) {
      buf[r.first + c].label = labels[c];
      buf[r.first + c].written = true;
    }
  }

  // Returns false on hazard (error is set).
  bool execute(const DmaCommand& cmd, int queue, int command) {
    const std::int64_t s = state.spec.chunk_size;
    RegionChunks src, dst, dst2, peer;
    switch (cmd.kind) {
      case CommandKind::Copy: {
        region_chunks(cmd.src, s, src);
        region_chunks(cmd.dst, s, dst);
        std::vector<Label> labels;
        if (!read(src, labels, queue, command)) return false;
        write(dst, labels);
        return true;
      }
      case CommandKind::Broadcast: {
        region_chunks(cmd.src, s, src);
        region_chunks(cmd.dst, s, dst);
        region_chunks(cmd.dst2, s, dst2);
        std::vector<Label> labels;
        if (!read(src, labels, queue, command)) return false;
        write(dst, labels);
        write(dst2, labels);
        return true;
      }
      case CommandKind::Swap: {
        // Simultaneous exchange: no observable intermediate, so the two
        // sides do not hazard against each other.
        region_chunks(cmd.src, s, src);
        region_chunks(cmd.peer, s, peer);
        std::vector<Label> a, b;
        if (!read(src, a, queue, command)) return false;
        if (!read(peer, b, queue, command)) return false;
        write(src, b);
        write(peer, a);
        return true;
      }
      default:
        return true;  // signals/polls/timestamps move no data
    }
  }

  bool check_postcondition() {
    const CollectiveSpec& spec = state.spec;
    const int n = spec.gpu_count;
    for (int g = 0; g < n; ++g) {
      auto& out = spec.in_place ? state.input[g] : state.output[g];
      for (int k = 0; k < n; ++k) {
        const Label& label = out[k].label;
        bool good = label.valid();
        if (spec.kind == CollectiveKind::AllGather) {
          good = good && label.origin == k;
        } else {
          good = good && label.origin == k && label.chunk == g;
        }
        if (!good) {
          std::ostringstream msg;
          msg << "mismatch: gpu " << g << " output slot " << k << " holds ";
          if (label.valid())
            msg << "(" << label.origin << "," << label.chunk << ")";
          else
            msg << "nothing";
          error = msg.str();
          return false;
        }
      }
    }
    return true;
  }
};

struct Step {
  int queue;
  int command;
  const DmaCommand* cmd;
};

// Data-movement commands grouped by queue, queue order preserved.
std::vector<std::vector<Step>> data_steps(const CommandProgram& program) {
  std::vector<std::vector<Step>> steps;
  for (size_t qi = 0; qi < program.queues.size(); ++qi) {
    std::vector<Step> qsteps;
    const auto& commands = program.queues[qi].commands;
    for (size_t ci = 0; ci < commands.size(); ++ci)
      if (commands[ci].is_data_movement())
        qsteps.push_back({static_cast<int>(qi), static_cast<int>(ci),
                          &commands[ci]});
    if (!qsteps.empty()) steps.push_back(std::move(qsteps));
  }
  return steps;
}

Verdict run_order(const CollectiveSpec& spec, const std::vector<Step>& order) {
  Executor exec(spec);
  for (const Step& step : order)
    if (!exec.execute(*step.cmd, step.queue, step.command))
      return {VerdictKind::Hazard, exec.error};
  if (!exec.check_postcondition()) return {VerdictKind::Mismatch, exec.error};
  return {};
}

// Walks every dependency-respecting interleaving, merging prefixes that
// reach the same per-queue progress: when each slot has a single writer
// the buffer state is a function of the progress vector alone, so the
// merge loses nothing, and every (state, command) edge is still executed
// and hazard-checked exactly once. This keeps full exhaustion polynomial
// in the progress lattice instead of factorial in the command count.
bool exhaustive(const std::vector<std::vector<Step>>& queues,
                std::vector<size_t>& cursor, size_t done, size_t total,
                Executor& exec, std::set<std::vector<size_t>>& visited,
                Verdict& verdict) {
  if (done == total) {
    if (!exec.check_postcondition()) {
      verdict = {VerdictKind::Mismatch, exec.error};
      return false;
    }
    return true;
  }
  for (size_t q = 0; q < queues.size(); ++q) {
    if (cursor[q] >= queues[q].size()) continue;
    const Step& step = queues[q][cursor[q]];
    Executor next = exec;
    if (!next.execute(*step.cmd, step.queue, step.command)) {
      verdict = {VerdictKind::Hazard, next.error};
      return false;
    }
    ++cursor[q];
    bool ok = !visited.insert(cursor).second ||
              exhaustive(queues, cursor, done + 1, total, next, visited,
                         verdict);
    --cursor[q];
    if (!ok) return false;
  }
  return true;
}

}  // namespace

Verdict verify_collective(const CommandProgram& program,
                          const CollectiveSpec& spec,
                          const VerifyOptions& options) {
  auto queues = data_steps(program);
  size_t total = 0;
  for (const auto& q : queues) total += q.size();
  if (total == 0)
    return {VerdictKind::Mismatch, "program moves no data"};

  if (total <= static_cast<size_t>(options.exhaustive_limit)) {
    Verdict verdict;
    std::vector<size_t> cursor(queues.size(), 0);
    Executor exec(spec);
    std::set<std::vector<size_t>> visited;
    if (!exhaustive(queues, cursor, 0, total, exec, visited, verdict))
      return verdict;
    return {};
  }

  std::mt19937_64 rng(options.seed);
  for (int trial = 0; trial < options.random_interleavings; ++trial) {
    std::vector<size_t> cursor(queues.size(), 0);
    std::vector<size_t> pending;
    for (size_t q = 0; q < queues.size(); ++q) pending.push_back(q);
    std::vector<Step> order;
    order.reserve(total);
    while (!pending.empty()) {
      std::uniform_int_distribution<size_t> pick(0, pending.size() - 1);
      size_t slot = pick(rng);
      size_t q = pending[slot];
      order.push_back(queues[q][cursor[q]++]);
      if (cursor[q] == queues[q].size()) {
        pending[slot] = pending.back();
        pending.pop_back();
      }
    }
    Verdict v = run_order(spec, order);
    if (!v.ok()) return v;
  }
  return {};
}

TrafficReport account_traffic(const CommandProgram& program) {
  TrafficReport report;
  auto add_link = [&](GpuId src, GpuId dst, std::int64_t bytes) {
    report.link_bytes[LinkId{src, dst}] += bytes;
    report.total_link_bytes += bytes;
  };
  auto add_read = [&](GpuId gpu, std::int64_t bytes) {
    report.per_gpu[gpu].hbm_read_bytes += bytes;
    report.total_read_bytes += bytes;
  };
  auto add_write = [&](GpuId gpu, std::int64_t bytes) {
    report.per_gpu[gpu].hbm_write_bytes += bytes;
    report.total_write_bytes += bytes;
  };
  for (const auto& queue : program.queues) {
    for (const auto& cmd : queue.commands) {
      switch (cmd.kind) {
        case CommandKind::Copy:
          add_read(cmd.src.gpu, cmd.size);
          add_write(cmd.dst.gpu, cmd.size);
          if (cmd.src.gpu != cmd.dst.gpu)
            add_link(cmd.src.gpu, cmd.dst.gpu, cmd.size);
          break;
        case CommandKind::Broadcast:
          add_read(cmd.src.gpu, cmd.size);  // source read once
          add_write(cmd.dst.gpu, cmd.size);
          add_write(cmd.dst2.gpu, cmd.size);
          if (cmd.src.gpu != cmd.dst.gpu)
            add_link(cmd.src.gpu, cmd.dst.gpu, cmd.size);
          if (cmd.src.gpu != cmd.dst2.gpu)
            add_link(cmd.src.gpu, cmd.dst2.gpu, cmd.size);
          break;
        case CommandKind::Swap:
          add_read(cmd.src.gpu, cmd.size);
          add_read(cmd.peer.gpu, cmd.size);
          add_write(cmd.src.gpu, cmd.size);
          add_write(cmd.peer.gpu, cmd.size);
          add_link(cmd.src.gpu, cmd.peer.gpu, cmd.size);
          add_link(cmd.peer.gpu, cmd.src.gpu, cmd.size);
          break;
        default:
          break;
      }
    }
  }
  return report;
}

}  // namespace dmasim
