#include "dmasim/sweep.hpp"
#include "doctest.h"

using namespace dmasim;

TEST_CASE("size parsing") {
  CHECK(parse_size("1024") == 1024);
  CHECK(parse_size("512K") == 512ll << 10);
  CHECK(parse_size("4M") == 4ll << 20);
  CHECK(parse_size("1G") == 1ll << 30);
  CHECK(parse_size("2g") == 2ll << 30);
  CHECK_THROWS(parse_size(""));
  CHECK_THROWS(parse_size("12Q"));
  CHECK_THROWS(parse_size("-4K"));
}

TEST_CASE("config validation") {
  SweepConfig cfg;
  validate_sweep_config(cfg);
  cfg.size_step = 1.0;
  CHECK_THROWS(validate_sweep_config(cfg));
  cfg = SweepConfig{};
  cfg.size_start = 4096;
  cfg.size_end = 1024;
  CHECK_THROWS(validate_sweep_config(cfg));
  cfg = SweepConfig{};
  cfg.implementations = {Implementation::Swap};  // not an all-gather impl
  CHECK_THROWS(validate_sweep_config(cfg));
}

TEST_CASE("single-point sweep yields one row per implementation") {
  NodeTopology topo = build_topology(8);
  CostModel cost;
  SweepConfig cfg;
  cfg.size_start = cfg.size_end = 4096;
  cfg.implementations = {Implementation::Pcpy, Implementation::B2b};
  SweepResult r = run_sweep(cfg, topo, cost);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].impl == Implementation::Pcpy);
  CHECK(r.rows[1].impl == Implementation::B2b);
  CHECK(r.rows[0].size_bytes == 4096);
  CHECK(r.rows[0].timeline.total_ns() > 0);
  CHECK_FALSE(r.summary.empty());
}

TEST_CASE("sweep CSV is byte-identical across runs and job counts") {
  NodeTopology topo = build_topology(8);
  CostModel cost;
  SweepConfig cfg;
  cfg.kind = CollectiveKind::AllToAll;
  cfg.size_start = 1 << 10;
  cfg.size_end = 1 << 16;
  cfg.seed = 99;

  SweepResult serial = run_sweep(cfg, topo, cost);
  SweepResult again = run_sweep(cfg, topo, cost);
  CHECK(serial.csv == again.csv);

  cfg.jobs = 4;
  SweepResult parallel = run_sweep(cfg, topo, cost);
  CHECK(serial.csv == parallel.csv);
}

TEST_CASE("winner grid spans the requested range") {
  NodeTopology topo = build_topology(8);
  CostModel cost;
  WinnerGrid grid = winner_grid(CollectiveKind::AllGather, 8, topo, cost,
                                1 << 10, 1 << 14);
  REQUIRE(grid.sizes.size() == 5);  // 1K..16K inclusive
  CHECK(grid.sizes.front() == 1 << 10);
  CHECK(grid.sizes.back() == 1 << 14);
  REQUIRE(grid.winners.size() == grid.sizes.size());
  for (Implementation w : grid.winners)
    CHECK(w == Implementation::PrelaunchB2b);  // small-size regime

  CHECK(boundary_between(grid, Implementation::PrelaunchB2b,
                         Implementation::PrelaunchBcst) == std::nullopt);
}

TEST_CASE("selection table covers the whole axis and renders") {
  NodeTopology topo = build_topology(8);
  CostModel cost;
  SelectionTable table =
      selection_table(CollectiveKind::AllGather, 8, topo, cost);
  REQUIRE_FALSE(table.ranges.empty());
  CHECK_FALSE(table.degenerate);
  CHECK(table.ranges.front().lo == 1 << 10);
  CHECK(table.ranges.back().hi == 0);  // open-ended
  for (size_t i = 1; i < table.ranges.size(); ++i)
    CHECK(table.ranges[i].lo == table.ranges[i - 1].hi);
  CHECK_FALSE(table.rendered.empty());
}

TEST_CASE("a degenerate cost model is flagged, not matched") {
  NodeTopology topo = build_topology(8);
  CostModel fluid;
  fluid.t_ctl = fluid.t_db = fluid.t_fetch = fluid.t_copy_fixed = 0;
  fluid.t_sig = fluid.t_obs = fluid.t_scan = 0;
  fluid.t_trig = fluid.t_poll_lat = 0;
  fluid.engine_throughput_cap = 1e18;
  SelectionTable table =
      selection_table(CollectiveKind::AllGather, 8, topo, fluid);
  CHECK(table.degenerate);
  CHECK_FALSE(table.all_match);
}

TEST_CASE("overlay joins on collective and size") {
  NodeTopology topo = build_topology(8);
  CostModel cost;
  SweepConfig cfg;
  cfg.size_start = 1 << 10;
  cfg.size_end = 1 << 12;
  cfg.implementations = {Implementation::Pcpy};
  SweepResult sweep = run_sweep(cfg, topo, cost);

  SUBCASE("self-overlay gives unit ratios") {
    std::string ref = "collective,size_bytes,total_ns\n";
    for (const SweepRow& row : sweep.rows) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "allgather,%lld,%.3f\n",
                    (long long)row.size_bytes, row.timeline.total_ns());
      ref += buf;
    }
    OverlayResult o = overlay_reference(sweep.csv, ref);
    REQUIRE(o.rows.size() == sweep.rows.size());
    for (const OverlayRow& row : o.rows)
      CHECK(row.ratio == doctest::Approx(1.0));
    CHECK(o.warnings.empty());
  }

  SUBCASE("unmatched sizes produce warnings") {
    std::string ref = "collective,size_bytes,total_ns\nallgather,12345,1.0\n";
    OverlayResult o = overlay_reference(sweep.csv, ref);
    CHECK(o.rows.empty());
    CHECK_FALSE(o.warnings.empty());
  }

  SUBCASE("scaled reference halves the ratio") {
    std::string ref = "collective,size_bytes,total_ns\n";
    char buf[128];
    std::snprintf(buf, sizeof(buf), "allgather,%d,%.3f\n", 1 << 10,
                  2.0 * sweep.rows[0].timeline.total_ns());
    ref += buf;
    OverlayResult o = overlay_reference(sweep.csv, ref);
    REQUIRE(o.rows.size() == 1);
    CHECK(o.rows[0].ratio == doctest::Approx(0.5));
  }
}
