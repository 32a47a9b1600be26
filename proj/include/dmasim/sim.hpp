#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dmasim/cost_model.hpp"
#include "dmasim/program.hpp"
#include "dmasim/topology.hpp"

namespace dmasim {

enum class Phase { Control, Schedule, Copy, Sync, Trigger, Poll, Kernel };

std::string to_string(Phase phase);

enum class EntityKind { Host, Engine, Link, Signal };

struct TimelineEvent {
  double time_ns = 0;
  EntityKind entity = EntityKind::Host;
  Phase phase = Phase::Control;
  int queue_index = -1;    // -1 for host-global events
  int command_index = -1;  // ordinal within the queue
  bool is_start = true;
  GpuId gpu = -1;  // engine events
  int engine_local = -1;
};

struct FlowRecord {
  int queue_index = 0;
  int command_index = 0;
  LinkId link;
  std::int64_t bytes = 0;
  double start_ns = 0;       // fetch completion (copy phase start)
  double active_ns = 0;      // start + t_copy_fixed
  double end_ns = 0;
  double transferred = 0;    // integral of rate dt, for conservation checks
};

struct Timeline {
  std::vector<TimelineEvent> events;  // time-ordered
  std::vector<FlowRecord> flows;
  double start_ns = 0;  // 0; prelaunch preparation sits at negative time
  double end_ns = 0;    // host has observed all completion signals
  std::map<Phase, double> critical_path_ns;  // decomposition of end-start
  // per-queue bookkeeping
  std::vector<double> queue_release_ns;      // doorbell or poll retire
  std::vector<double> signal_complete_ns;    // per queue with a signal
  std::vector<GpuId> queue_gpu;
  std::vector<int> queue_engine_local;
  std::vector<double> queue_busy_ns;         // fetch + copy + signal time
  std::vector<int> queue_command_count;
  int completion_signal_count = 0;
  bool prelaunched = false;
  double sync_chain_overhead_ns = 0;  // simulate_sync_chain only
  double kernel_ns = 0;

  double total_ns() const { return end_ns - start_ns; }
};

/// A flow competing for one or two resources (its link and its engine).
/// Used by the max-min allocator; exposed for oracle-based testing.
struct FlowDemand {
  std::vector<int> resources;  // indices into the capacity vector
};

/// Max-min fair rates for `flows` under per-resource `capacity`. No flow's
/// rate can be raised without lowering an equal-or-slower flow's rate.
std::vector<double> maxmin_rates(const std::vector<FlowDemand>& flows,
                                 const std::vector<double>& capacity);

struct SimOptions {
  bool record_events = true;
};

/// Deterministic event-driven fluid simulation of a validated program.
Timeline simulate(const CommandProgram& program, const NodeTopology& topo,
                  const CostModel& cost, const SimOptions& options = {});

/// Producer kernel -> stream signal -> host forward -> trigger -> DMA.
/// Requires a prelaunched program.
Timeline simulate_sync_chain(double gemm_duration_ns,
                             const CommandProgram& program,
                             const NodeTopology& topo, const CostModel& cost,
                             const SimOptions& options = {});

/// Fractions of critical-path time per phase; they sum to 1.
std::map<Phase, double> phase_breakdown(const Timeline& timeline);

struct EngineActivity {
  double busy_ns = 0;
  int commands = 0;
};

struct ActivityReport {
  std::map<GpuId, EngineActivity> per_gpu;
  int engines_used = 0;
  double total_busy_ns = 0;
};

/// Engine-busy-time integrals: a countable proxy for power.
ActivityReport engine_activity_report(const Timeline& timeline);

/// Trace-event JSON (ph:"B"/"E", ts in microseconds, pid=gpu, tid=engine).
std::string export_trace_json(const Timeline& timeline,
                              const CommandProgram& program);

/// CSV row: impl,collective,gpus,size_bytes,total_ns,control_ns,
/// schedule_ns,copy_ns,sync_ns,trigger_ns (poll folded into trigger).
std::string timeline_csv_header();
std::string timeline_csv_row(const Timeline& timeline,
                             const CommandProgram& program);

}  // namespace dmasim
