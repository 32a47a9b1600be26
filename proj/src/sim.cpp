#include "dmasim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dmasim {

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::Control: return "control";
    case Phase::Schedule: return "schedule";
    case Phase::Copy: return "copy";
    case Phase::Sync: return "sync";
    case Phase::Trigger: return "trigger";
    case Phase::Poll: return "poll";
    case Phase::Kernel: return "kernel";
  }
  return "?";
}

std::vector<double> maxmin_rates(const std::vector<FlowDemand>& flows,
                                 const std::vector<double>& capacity) {
  const size_t nf = flows.size();
  std::vector<double> rate(nf, 0.0);
  std::vector<bool> frozen(nf, false);
  std::vector<double> remaining = capacity;
  std::vector<int> load(capacity.size(), 0);
  size_t unfrozen = nf;
  while (unfrozen > 0) {
    std::fill(load.begin(), load.end(), 0);
    for (size_t f = 0; f < nf; ++f)
      if (!frozen[f])
        for (int r : flows[f].resources) ++load[r];
    // Water level rises until the tightest resource saturates.
    double delta = std::numeric_limits<double>::infinity();
    for (size_t r = 0; r < capacity.size(); ++r)
      if (load[r] > 0) delta = std::min(delta, remaining[r] / load[r]);
    if (!std::isfinite(delta)) break;  // flows with no resources
    for (size_t r = 0; r < capacity.size(); ++r)
      if (load[r] > 0) remaining[r] -= delta * load[r];
    for (size_t f = 0; f < nf; ++f)
      if (!frozen[f]) rate[f] += delta;
    // Freeze every flow that crosses a saturated resource.
    for (size_t f = 0; f < nf; ++f) {
      if (frozen[f]) continue;
      for (int r : flows[f].resources) {
        if (remaining[r] <= capacity[r] * 1e-12) {
          frozen[f] = true;
          --unfrozen;
          break;
        }
      }
    }
  }
  return rate;
}

namespace {

struct SimFlow {
  int queue_index;
  int command_index;
  LinkId link;
  int link_res;
  int engine_res;
  double arrival;  // fetch end + t_copy_fixed
  double fetch_end;
  std::int64_t bytes;
  double remaining;
  double transferred = 0;
  double end = -1;
};

struct QueueState {
  double release = 0;              // doorbell end or poll retire
  double trigger_end = 0;          // prelaunched only
  double last_flow_end = 0;
  double signal_fetch_end = 0;
  double signal_complete = -1;
  int signal_command_index = -1;
  int critical_flow = -1;          // index into flows, last to finish
  double fetch_per_effective = 0;  // bookkeeping for busy time
  int effective_commands = 0;
  bool has_data = false;
};

struct Ctx {
  const CommandProgram& program;
  const NodeTopology& topo;
  const CostModel& cost;
  const SimOptions& options;
  Timeline tl;
  std::vector<SimFlow> flows;
  std::vector<QueueState> qs;
  std::vector<double> capacity;
  std::map<LinkId, int> link_res;
  int resource_count = 0;

  int link_resource(LinkId link) {
    auto [it, inserted] = link_res.try_emplace(link, resource_count);
    if (inserted) {
      ++resource_count;
      capacity.push_back(topo.link_bandwidth);
    }
    return it->second;
  }

  void event(double t, EntityKind entity, Phase phase, int q, int c,
             bool start, GpuId gpu = -1, int local = -1) {
    if (!options.record_events) return;
    tl.events.push_back({t, entity, phase, q, c, start, gpu, local});
  }
};

// Runs the fluid bandwidth-sharing engine: advances between flow arrival
// and departure events, recomputing max-min rates at each one.
void run_flows(Ctx& ctx) {
  auto& flows = ctx.flows;
  std::vector<int> order(flows.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return flows[a].arrival < flows[b].arrival;
  });

  std::vector<int> active;
  size_t next_arrival = 0;
  double now = order.empty() ? 0.0 : flows[order[0]].arrival;
  while (next_arrival < order.size() || !active.empty()) {
    while (next_arrival < order.size() &&
           flows[order[next_arrival]].arrival <= now) {
      active.push_back(order[next_arrival]);
      ++next_arrival;
    }
    if (active.empty()) {
      now = flows[order[next_arrival]].arrival;
      continue;
    }
    std::vector<FlowDemand> demands;
    demands.reserve(active.size());
    for (int f : active)
      demands.push_back({{flows[f].link_res, flows[f].engine_res}});
    std::vector<double> rates = maxmin_rates(demands, ctx.capacity);

    double horizon = std::numeric_limits<double>::infinity();
    if (next_arrival < order.size())
      horizon = flows[order[next_arrival]].arrival;
    double finish = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < active.size(); ++i)
      if (rates[i] > 0)
        finish = std::min(finish,
                          now + flows[active[i]].remaining / rates[i] * 1e9);
    const double next = std::min(horizon, finish);
    const double dt = next - now;
    for (size_t i = 0; i < active.size(); ++i) {
      SimFlow& fl = flows[active[i]];
      const double moved = rates[i] * dt * 1e-9;
      fl.remaining -= moved;
      fl.transferred += moved;
    }
    now = next;
    // Departures: finished flows leave before rates are recomputed.
    for (size_t i = active.size(); i-- > 0;) {
      SimFlow& fl = flows[active[i]];
      if (fl.remaining <= fl.bytes * 1e-12) {
        fl.remaining = 0;
        fl.transferred = static_cast<double>(fl.bytes);
        fl.end = now;
        active.erase(active.begin() + i);
      }
    }
  }
}

}  // namespace

static Timeline simulate_impl(const CommandProgram& program,
                              const NodeTopology& topo, const CostModel& cost,
                              const SimOptions& options, double kernel_ns,
                              bool sync_chain) {
  validate_cost_model(cost, topo);
  Ctx ctx{program, topo, cost, options};
  Timeline& tl = ctx.tl;
  const size_t nq = program.queues.size();
  ctx.qs.resize(nq);
  tl.prelaunched = program.metadata.prelaunched;
  tl.completion_signal_count =
      static_cast<int>(program.completion_signals.size());
  tl.queue_release_ns.assign(nq, 0);
  tl.signal_complete_ns.assign(nq, -1);
  tl.queue_gpu.assign(nq, -1);
  tl.queue_engine_local.assign(nq, -1);
  tl.queue_busy_ns.assign(nq, 0);
  tl.queue_command_count.assign(nq, 0);

  // Engine resources: one per queue (queues own distinct engines).
  std::vector<int> engine_res(nq, -1);
  for (size_t q = 0; q < nq; ++q) {
    engine_res[q] = ctx.resource_count++;
    ctx.capacity.push_back(cost.engine_throughput_cap);
    tl.queue_gpu[q] = program.queues[q].engine.gpu;
    tl.queue_engine_local[q] = program.queues[q].engine.local;
  }

  // Timestamp commands are zero-cost markers; they take no host, fetch or
  // engine time.
  auto effective = [](const DmaCommand& cmd) {
    return cmd.kind != CommandKind::Timestamp;
  };

  int total_commands = 0;
  std::vector<int> nonempty;  // queue order for doorbells / triggers
  for (size_t q = 0; q < nq; ++q) {
    for (const auto& cmd : program.queues[q].commands)
      if (effective(cmd)) ++total_commands;
    if (!program.queues[q].commands.empty())
      nonempty.push_back(static_cast<int>(q));
  }

  const bool prelaunched = program.metadata.prelaunched;
  // Polls left ungated deadlock; only prelaunched trigger slots are written.
  for (size_t q = 0; q < nq; ++q)
    for (const auto& cmd : program.queues[q].commands)
      if (cmd.kind == CommandKind::Poll) {
        bool triggered =
            prelaunched &&
            std::find(program.trigger_slots.begin(),
                      program.trigger_slots.end(),
                      cmd.poll_slot) != program.trigger_slots.end();
        if (!triggered) {
          std::ostringstream msg;
          msg << "deadlock: poll on slot " << cmd.poll_slot
              << " is never triggered (queue " << q << ")";
          throw std::runtime_error(msg.str());
        }
      }

  const double chain_lead =
      sync_chain ? kernel_ns + cost.t_stream_sig + cost.t_host_fwd : 0.0;
  double control_end = 0;

  if (!prelaunched) {
    // Host: control for every command, then one doorbell per queue.
    double t = 0;
    for (size_t q = 0; q < nq; ++q)
      for (size_t c = 0; c < program.queues[q].commands.size(); ++c) {
        if (!effective(program.queues[q].commands[c])) continue;
        ctx.event(t, EntityKind::Host, Phase::Control, static_cast<int>(q),
                  static_cast<int>(c), true);
        t += cost.t_ctl;
        ctx.event(t, EntityKind::Host, Phase::Control, static_cast<int>(q),
                  static_cast<int>(c), false);
      }
    control_end = t;
    for (int q : nonempty) {
      ctx.event(t, EntityKind::Host, Phase::Schedule, q, -1, true);
      t += cost.t_db;
      ctx.event(t, EntityKind::Host, Phase::Schedule, q, -1, false);
      ctx.qs[q].release = t;
    }
  } else {
    // Preparation (control, doorbells, poll fetches) happens ahead of time
    // at negative timestamps; the critical path starts at the triggers.
    const double prep = total_commands * cost.t_ctl +
                        nonempty.size() * cost.t_db + cost.t_fetch;
    double t = -prep;
    for (size_t q = 0; q < nq; ++q)
      for (size_t c = 0; c < program.queues[q].commands.size(); ++c) {
        if (!effective(program.queues[q].commands[c])) continue;
        ctx.event(t, EntityKind::Host, Phase::Control, static_cast<int>(q),
                  static_cast<int>(c), true);
        t += cost.t_ctl;
        ctx.event(t, EntityKind::Host, Phase::Control, static_cast<int>(q),
                  static_cast<int>(c), false);
      }
    for (int q : nonempty) {
      ctx.event(t, EntityKind::Host, Phase::Schedule, q, -1, true);
      t += cost.t_db;
      ctx.event(t, EntityKind::Host, Phase::Schedule, q, -1, false);
    }
    // Trigger writes, serialized on the host, define time zero (shifted by
    // the producer chain when simulating one).
    double trig = chain_lead;
    for (int q : nonempty) {
      ctx.event(trig, EntityKind::Host, Phase::Trigger, q, -1, true);
      trig += cost.t_trig;
      ctx.event(trig, EntityKind::Host, Phase::Trigger, q, -1, false);
      ctx.qs[q].trigger_end = trig;
      ctx.event(trig, EntityKind::Engine, Phase::Poll, q, 0, true,
                tl.queue_gpu[q], tl.queue_engine_local[q]);
      ctx.qs[q].release = trig + cost.t_poll_lat;
      ctx.event(ctx.qs[q].release, EntityKind::Engine, Phase::Poll, q, 0,
                false, tl.queue_gpu[q], tl.queue_engine_local[q]);
    }
  }

  // Engines: sequential fetches per queue, overlapped execution.
  const Phase fetch_phase = prelaunched ? Phase::Poll : Phase::Schedule;
  for (size_t q = 0; q < nq; ++q) {
    const CommandQueue& queue = program.queues[q];
    QueueState& st = ctx.qs[q];
    tl.queue_release_ns[q] = st.release;
    double fetch = st.release;
    for (size_t c = 0; c < queue.commands.size(); ++c) {
      const DmaCommand& cmd = queue.commands[c];
      if (!effective(cmd)) continue;
      if (cmd.kind == CommandKind::Poll) continue;  // retired at release
      ctx.event(fetch, EntityKind::Engine, fetch_phase, static_cast<int>(q),
                static_cast<int>(c), true, tl.queue_gpu[q],
                tl.queue_engine_local[q]);
      fetch += cost.t_fetch;
      ctx.event(fetch, EntityKind::Engine, fetch_phase, static_cast<int>(q),
                static_cast<int>(c), false, tl.queue_gpu[q],
                tl.queue_engine_local[q]);
      ++st.effective_commands;
      st.fetch_per_effective += cost.t_fetch;
      if (cmd.is_data_movement()) {
        st.has_data = true;
        auto add_flow = [&](GpuId src, GpuId dst) {
          SimFlow fl;
          fl.queue_index = static_cast<int>(q);
          fl.command_index = static_cast<int>(c);
          fl.link = LinkId{src, dst};
          fl.link_res = ctx.link_resource(fl.link);
          fl.engine_res = engine_res[q];
          fl.fetch_end = fetch;
          fl.arrival = fetch + cost.t_copy_fixed;
          fl.bytes = cmd.size;
          fl.remaining = static_cast<double>(cmd.size);
          ctx.flows.push_back(fl);
        };
        switch (cmd.kind) {
          case CommandKind::Copy:
            add_flow(cmd.src.gpu, cmd.dst.gpu);
            break;
          case CommandKind::Broadcast:
            add_flow(cmd.src.gpu, cmd.dst.gpu);
            add_flow(cmd.src.gpu, cmd.dst2.gpu);
            break;
          case CommandKind::Swap:
            add_flow(cmd.src.gpu, cmd.peer.gpu);
            add_flow(cmd.peer.gpu, cmd.src.gpu);
            break;
          default:
            break;
        }
      } else if (cmd.kind == CommandKind::AtomicSignal) {
        st.signal_command_index = static_cast<int>(c);
        st.signal_fetch_end = fetch;
      }
    }
    tl.queue_command_count[q] = st.effective_commands;
  }

  run_flows(ctx);

  for (size_t f = 0; f < ctx.flows.size(); ++f) {
    const SimFlow& fl = ctx.flows[f];
    QueueState& st = ctx.qs[fl.queue_index];
    if (fl.end > st.last_flow_end ||
        (st.critical_flow < 0 && fl.end >= st.last_flow_end)) {
      st.last_flow_end = fl.end;
      st.critical_flow = static_cast<int>(f);
    }
    ctx.event(fl.fetch_end, EntityKind::Link, Phase::Copy, fl.queue_index,
              fl.command_index, true, tl.queue_gpu[fl.queue_index],
              tl.queue_engine_local[fl.queue_index]);
    ctx.event(fl.end, EntityKind::Link, Phase::Copy, fl.queue_index,
              fl.command_index, false, tl.queue_gpu[fl.queue_index],
              tl.queue_engine_local[fl.queue_index]);
    tl.flows.push_back({fl.queue_index, fl.command_index, fl.link, fl.bytes,
                        fl.fetch_end, fl.arrival, fl.end, fl.transferred});
  }

  // Signals: executed once everything ahead of them in the queue is done.
  double last_signal = 0;
  int critical_queue = -1;
  for (size_t q = 0; q < nq; ++q) {
    QueueState& st = ctx.qs[q];
    if (st.signal_command_index < 0) continue;
    const double start = std::max(st.signal_fetch_end, st.last_flow_end);
    st.signal_complete = start + cost.t_sig;
    tl.signal_complete_ns[q] = st.signal_complete;
    ctx.event(start, EntityKind::Signal, Phase::Sync, static_cast<int>(q),
              st.signal_command_index, true, tl.queue_gpu[q],
              tl.queue_engine_local[q]);
    ctx.event(st.signal_complete, EntityKind::Signal, Phase::Sync,
              static_cast<int>(q), st.signal_command_index, false,
              tl.queue_gpu[q], tl.queue_engine_local[q]);
    if (st.signal_complete > last_signal) {
      last_signal = st.signal_complete;
      critical_queue = static_cast<int>(q);
    }
  }

  // Busy time: fetches + copy activity + signal execution per queue.
  for (size_t q = 0; q < nq; ++q) {
    QueueState& st = ctx.qs[q];
    tl.queue_busy_ns[q] = st.fetch_per_effective;
    if (st.signal_command_index >= 0) tl.queue_busy_ns[q] += cost.t_sig;
  }
  for (const SimFlow& fl : ctx.flows)
    tl.queue_busy_ns[fl.queue_index] += fl.end - fl.fetch_end;

  const int signal_count = tl.completion_signal_count;
  double end;
  if (signal_count > 0) {
    const double obs = cost.t_obs + cost.t_scan * (signal_count - 1);
    end = last_signal + obs;
    ctx.event(last_signal, EntityKind::Host, Phase::Sync, critical_queue, -1,
              true);
    ctx.event(end, EntityKind::Host, Phase::Sync, critical_queue, -1, false);
  } else {
    end = prelaunched ? chain_lead : control_end;
  }
  tl.start_ns = 0;
  tl.end_ns = end;
  tl.kernel_ns = sync_chain ? kernel_ns : 0;

  // Critical path: walk back from the observation through the queue whose
  // signal landed last; every nanosecond on the path gets a phase.
  auto& cp = tl.critical_path_ns;
  for (Phase p : {Phase::Control, Phase::Schedule, Phase::Copy, Phase::Sync,
                  Phase::Trigger, Phase::Poll, Phase::Kernel})
    cp[p] = 0;
  if (signal_count > 0 && critical_queue >= 0) {
    const QueueState& st = ctx.qs[critical_queue];
    cp[Phase::Sync] += end - last_signal;  // host observation
    cp[Phase::Sync] += cost.t_sig;
    const double signal_start = st.signal_complete - cost.t_sig;
    double chain_tail;  // where the pre-release engine chain ends
    if (st.last_flow_end >= st.signal_fetch_end && st.critical_flow >= 0) {
      const SimFlow& fl = ctx.flows[st.critical_flow];
      cp[Phase::Copy] += fl.end - fl.fetch_end;
      // Possible wait between the copy end and the signal start is zero by
      // construction (signal_start == last_flow_end here).
      cp[fetch_phase] += fl.fetch_end - st.release;
      chain_tail = st.release;
    } else {
      cp[fetch_phase] += signal_start - st.release;
      chain_tail = st.release;
    }
    if (!prelaunched) {
      cp[Phase::Schedule] += chain_tail - control_end;  // doorbells
      cp[Phase::Control] += control_end;
    } else {
      cp[Phase::Poll] += cost.t_poll_lat;
      cp[Phase::Trigger] += st.trigger_end - chain_lead;
      if (sync_chain) {
        cp[Phase::Sync] += cost.t_stream_sig + cost.t_host_fwd;
        cp[Phase::Kernel] += kernel_ns;
      }
    }
  }

  if (options.record_events)
    std::stable_sort(tl.events.begin(), tl.events.end(),
                     [](const TimelineEvent& a, const TimelineEvent& b) {
                       return a.time_ns < b.time_ns;
                     });
  return tl;
}

Timeline simulate(const CommandProgram& program, const NodeTopology& topo,
                  const CostModel& cost, const SimOptions& options) {
  return simulate_impl(program, topo, cost, options, 0, false);
}

Timeline simulate_sync_chain(double gemm_duration_ns,
                             const CommandProgram& program,
                             const NodeTopology& topo, const CostModel& cost,
                             const SimOptions& options) {
  if (!program.metadata.prelaunched)
    throw std::invalid_argument(
        "simulate_sync_chain requires a prelaunched program");
  if (gemm_duration_ns < 0)
    throw std::invalid_argument("gemm duration must be >= 0");
  Timeline tl =
      simulate_impl(program, topo, cost, options, gemm_duration_ns, true);
  if (gemm_duration_ns > 0) {
    TimelineEvent b{0, EntityKind::Engine, Phase::Kernel, -1, -1, true};
    TimelineEvent e{gemm_duration_ns, EntityKind::Engine, Phase::Kernel, -1,
                    -1, false};
    if (options.record_events) {
      tl.events.insert(tl.events.begin(), e);
      tl.events.insert(tl.events.begin(), b);
    }
  }
  Timeline standalone = simulate(program, topo, cost, {false});
  tl.sync_chain_overhead_ns =
      tl.total_ns() - gemm_duration_ns - standalone.total_ns();
  return tl;
}

std::map<Phase, double> phase_breakdown(const Timeline& timeline) {
  std::map<Phase, double> fractions;
  const double total = timeline.total_ns();
  if (total <= 0) return fractions;
  for (const auto& [phase, ns] : timeline.critical_path_ns)
    fractions[phase] = ns / total;
  return fractions;
}

ActivityReport engine_activity_report(const Timeline& timeline) {
  ActivityReport report;
  for (size_t q = 0; q < timeline.queue_busy_ns.size(); ++q) {
    if (timeline.queue_command_count[q] == 0) continue;
    EngineActivity& a = report.per_gpu[timeline.queue_gpu[q]];
    a.busy_ns += timeline.queue_busy_ns[q];
    a.commands += timeline.queue_command_count[q];
    report.engines_used += 1;
    report.total_busy_ns += timeline.queue_busy_ns[q];
  }
  return report;
}

std::string export_trace_json(const Timeline& timeline,
                              const CommandProgram& program) {
  nlohmann::json events = nlohmann::json::array();
  for (const TimelineEvent& ev : timeline.events) {
    nlohmann::json j;
    std::string name = to_string(ev.phase);
    if (ev.queue_index >= 0 &&
        ev.queue_index < static_cast<int>(program.queues.size()) &&
        ev.command_index >= 0) {
      const auto& cmds = program.queues[ev.queue_index].commands;
      if (ev.command_index < static_cast<int>(cmds.size()))
        name += ":" + to_string(cmds[ev.command_index].kind);
    }
    j["name"] = name;
    j["ph"] = ev.is_start ? "B" : "E";
    j["ts"] = ev.time_ns / 1000.0;  // microseconds
    j["pid"] = ev.entity == EntityKind::Host ? -1 : ev.gpu;
    j["tid"] = ev.entity == EntityKind::Host ? 0 : ev.engine_local;
    events.push_back(std::move(j));
  }
  return events.dump(1);
}

std::string timeline_csv_header() {
  return "impl,collective,gpus,size_bytes,total_ns,control_ns,schedule_ns,"
         "copy_ns,sync_ns,trigger_ns\n";
}

std::string timeline_csv_row(const Timeline& timeline,
                             const CommandProgram& program) {
  const auto& cp = timeline.critical_path_ns;
  auto get = [&](Phase p) {
    auto it = cp.find(p);
    return it == cp.end() ? 0.0 : it->second;
  };
  char buf[320];
  // Poll release time rides in the trigger column (fixed CSV schema).
  std::snprintf(buf, sizeof(buf), "%s,%s,%d,%lld,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f\n",
                program.metadata.implementation.c_str(),
                to_string(program.metadata.spec.kind).c_str(),
                program.metadata.spec.gpu_count,
                static_cast<long long>(program.metadata.spec.chunk_size),
                timeline.total_ns(), get(Phase::Control), get(Phase::Schedule),
                get(Phase::Copy), get(Phase::Sync),
                get(Phase::Trigger) + get(Phase::Poll));
  return buf;
}

}  // namespace dmasim
