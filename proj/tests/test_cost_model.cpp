#include <sstream>

#include "dmasim/cost_model.hpp"
#include "dmasim/topology.hpp"
#include "doctest.h"

using namespace dmasim;

namespace {
DmaCommand data_cmd(CommandKind kind, std::int64_t size) {
  DmaCommand cmd;
  cmd.kind = kind;
  cmd.size = size;
  return cmd;
}
}  // namespace

TEST_CASE("copy duration: fixed cost plus link-limited transfer") {
  CostModel cost;
  // 2MB over a 64 GB/s link: 2097152 / 64e9 s = 32768 ns
  double d = copy_duration(cost, data_cmd(CommandKind::Copy, 2 << 20), 64e9);
  CHECK(d == doctest::Approx(cost.t_copy_fixed + 32768.0));
}

TEST_CASE("copy duration: engine cap binds when slower than the link") {
  CostModel cost;
  cost.engine_throughput_cap = 32e9;
  double d = copy_duration(cost, data_cmd(CommandKind::Copy, 2 << 20), 64e9);
  CHECK(d == doctest::Approx(cost.t_copy_fixed + (2 << 20) / 32e9 * 1e9));
}

TEST_CASE("broadcast halves the per-flow engine share") {
  CostModel cost;  // cap 104e9, links 96e9: per-flow min(96e9, 52e9) = 52e9
  double d =
      copy_duration(cost, data_cmd(CommandKind::Broadcast, 1 << 20), 96e9);
  CHECK(d == doctest::Approx(cost.t_copy_fixed + (1 << 20) / 52e9 * 1e9));

  // wide links: both flows ride the cap/2 share
  double d2 =
      copy_duration(cost, data_cmd(CommandKind::Broadcast, 1 << 20), 40e9);
  CHECK(d2 == doctest::Approx(cost.t_copy_fixed + (1 << 20) / 40e9 * 1e9));
}

TEST_CASE("swap matches broadcast sharing") {
  CostModel cost;
  double b = copy_duration(cost, data_cmd(CommandKind::Broadcast, 4096), 64e9);
  double s = copy_duration(cost, data_cmd(CommandKind::Swap, 4096), 64e9);
  CHECK(b == doctest::Approx(s));
}

TEST_CASE("copy duration rejects nonpositive rates; non-data is free") {
  CostModel cost;
  CHECK_THROWS(copy_duration(cost, data_cmd(CommandKind::Copy, 4096), 0));
  CHECK(copy_duration(cost, data_cmd(CommandKind::AtomicSignal, 0), 64e9) ==
        0);
  CHECK(copy_duration(cost, data_cmd(CommandKind::Timestamp, 0), 64e9) == 0);
}

TEST_CASE("validation enforces sane parameters") {
  NodeTopology topo = build_topology(8);
  CostModel cost;
  validate_cost_model(cost, topo);  // defaults pass

  cost.t_fetch = -1;
  CHECK_THROWS_AS(validate_cost_model(cost, topo), std::invalid_argument);

  cost = CostModel{};
  cost.engine_throughput_cap = topo.link_bandwidth / 2;  // cap below link
  CHECK_THROWS_AS(validate_cost_model(cost, topo), std::invalid_argument);
}

TEST_CASE("serialization round-trips bit-exactly") {
  CostModel cost;
  cost.t_scan = 137.99999999999997;
  cost.engine_throughput_cap = 104e9 * (1 + 1e-14);
  cost.calibration_seed = 0xdeadbeef;

  std::istringstream in(serialize_cost_model(cost));
  CostModel back = load_cost_model(in);
  CHECK(back.t_scan == cost.t_scan);
  CHECK(back.engine_throughput_cap == cost.engine_throughput_cap);
  CHECK(back.calibration_seed == cost.calibration_seed);
  CHECK(serialize_cost_model(back) == serialize_cost_model(cost));

  std::istringstream unknown("t_flux_ns = 1\n");
  CHECK_THROWS(load_cost_model(unknown));
}

TEST_CASE("calibration satisfies the default targets deterministically") {
  NodeTopology topo = build_topology(8);
  CalibrationTargets targets;
  CalibrationResult a = calibrate(targets, topo, /*seed=*/1, /*iterations=*/5);
  CHECK(a.satisfied);
  CHECK(a.residual == 0);
  CHECK_FALSE(a.report.empty());

  CalibrationResult b = calibrate(targets, topo, /*seed=*/1, /*iterations=*/5);
  CHECK(serialize_cost_model(a.model) == serialize_cost_model(b.model));
}

TEST_CASE("calibration reports failure on unsatisfiable targets") {
  NodeTopology topo = build_topology(8);
  CalibrationTargets impossible;
  impossible.small_fraction_lo = 0.99;         // nearly all overhead at 4KB
  impossible.large_fraction_max = 0.0000001;   // and none at 2MB
  CalibrationResult r = calibrate(impossible, topo, 3, 20);
  CHECK_FALSE(r.satisfied);
  CHECK(r.residual > 0);
}
