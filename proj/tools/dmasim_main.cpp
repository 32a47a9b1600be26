// Command-line front end: compile, verify, simulate, sweep, select,
// calibrate and overlay subcommands over the dmasim library.

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "dmasim/compiler.hpp"
#include "dmasim/cost_model.hpp"
#include "dmasim/sim.hpp"
#include "dmasim/sweep.hpp"
#include "dmasim/verifier.hpp"

namespace {

using namespace dmasim;

struct GlobalOpts {
  std::string topology_path;
  std::string cost_model_path;
  std::string out_path;
  std::uint64_t seed = 0;
  int jobs = 1;
};

NodeTopology topology_for(const GlobalOpts& g, int gpus) {
  if (!g.topology_path.empty()) {
    NodeTopology topo = load_topology_file(g.topology_path);
    return topo;
  }
  return build_topology(gpus);
}

CostModel cost_for(const GlobalOpts& g) {
  if (!g.cost_model_path.empty()) return load_cost_model_file(g.cost_model_path);
  return CostModel{};  // frozen calibrated defaults
}

void write_or_print(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

CollectiveKind kind_arg(const std::string& name) {
  auto kind = parse_collective(name);
  if (!kind) throw CLI::ValidationError("--collective", "unknown collective");
  return *kind;
}

Implementation impl_arg(const std::string& name) {
  auto impl = parse_implementation(name);
  if (!impl) throw CLI::ValidationError("--impl", "unknown implementation");
  return *impl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DMA collective compiler and discrete-event simulator"};
  app.require_subcommand(1);
  GlobalOpts g;
  app.add_option("--topology", g.topology_path, "topology config file");
  app.add_option("--cost-model", g.cost_model_path, "cost model config file");
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--jobs", g.jobs, "parallel sweep workers");
  app.add_option("--out", g.out_path, "output file (default: stdout)");

  std::string collective = "allgather", impl_name = "pcpy", size_text = "1M";
  int gpus = 8;

  auto* cmd_compile = app.add_subcommand("compile", "compile a collective");
  std::string dump_path;
  cmd_compile->add_option("--collective", collective)->required();
  cmd_compile->add_option("--impl", impl_name)->required();
  cmd_compile->add_option("--size", size_text)->required();
  cmd_compile->add_option("--gpus", gpus);
  cmd_compile->add_option("--dump-program", dump_path);

  auto* cmd_verify = app.add_subcommand("verify", "verify collective semantics");
  cmd_verify->add_option("--collective", collective)->required();
  cmd_verify->add_option("--impl", impl_name)->required();
  cmd_verify->add_option("--size", size_text);
  cmd_verify->add_option("--gpus", gpus);

  auto* cmd_sim = app.add_subcommand("simulate", "simulate one collective");
  std::string trace_path;
  double gemm_ns = -1;
  cmd_sim->add_option("--collective", collective)->required();
  cmd_sim->add_option("--impl", impl_name)->required();
  cmd_sim->add_option("--size", size_text)->required();
  cmd_sim->add_option("--gpus", gpus);
  cmd_sim->add_option("--trace", trace_path, "trace-event JSON output");
  cmd_sim->add_option("--gemm-ns", gemm_ns,
                      "simulate a producer-GEMM sync chain of this duration");

  auto* cmd_sweep = app.add_subcommand("sweep", "size sweep to CSV");
  std::vector<std::string> impl_list;
  std::string start_text = "1K", end_text = "4G";
  std::string summary_path;
  cmd_sweep->add_option("--collective", collective)->required();
  cmd_sweep->add_option("--impls", impl_list, "implementations (default: all)");
  cmd_sweep->add_option("--start", start_text);
  cmd_sweep->add_option("--end", end_text);
  cmd_sweep->add_option("--gpus", gpus);
  cmd_sweep->add_option("--summary", summary_path, "summary output file");

  auto* cmd_select = app.add_subcommand("select", "simulated vs prescribed selection table");
  cmd_select->add_option("--collective", collective)->required();
  cmd_select->add_option("--gpus", gpus);

  auto* cmd_cal = app.add_subcommand("calibrate", "fit cost model to targets");
  int iterations = 400;
  cmd_cal->add_option("--iterations", iterations);

  auto* cmd_overlay = app.add_subcommand("overlay", "join sweep with reference");
  std::string sweep_path, reference_path;
  cmd_overlay->add_option("--sweep", sweep_path)->required();
  cmd_overlay->add_option("--reference", reference_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_compile->parsed()) {
      CollectiveKind kind = kind_arg(collective);
      Implementation impl = impl_arg(impl_name);
      CollectiveSpec spec{kind, parse_size(size_text), gpus, false};
      NodeTopology topo = topology_for(g, gpus);
      CommandProgram program = compile(impl, spec, topo);
      auto validation = validate_program(program, topo);
      if (!validation.ok) {
        std::cerr << "invalid program: " << validation.violation->message
                  << "\n";
        return 1;
      }
      MetricsReport metrics = static_metrics(program);
      std::cout << program.metadata.implementation << ": "
                << metrics.data_commands << " data, " << metrics.sync_commands
                << " sync, " << metrics.poll_commands << " poll, "
                << metrics.engines_used << " engines, " << metrics.doorbells
                << " doorbells\n";
      if (!dump_path.empty()) write_or_print(dump_path, dump_program(program));
      return 0;
    }
    if (cmd_verify->parsed()) {
      CollectiveKind kind = kind_arg(collective);
      Implementation impl = impl_arg(impl_name);
      CollectiveSpec spec{kind, parse_size(size_text), gpus, false};
      NodeTopology topo = topology_for(g, gpus);
      CommandProgram program = compile(impl, spec, topo);
      auto validation = validate_program(program, topo);
      if (!validation.ok) {
        std::cout << "invalid: " << validation.violation->message << "\n";
        return 1;
      }
      VerifyOptions vo;
      vo.seed = g.seed;
      Verdict verdict = verify_collective(program, program.metadata.spec, vo);
      std::cout << (verdict.ok() ? "ok" : verdict.detail) << "\n";
      return verdict.ok() ? 0 : 1;
    }
    if (cmd_sim->parsed()) {
      CollectiveKind kind = kind_arg(collective);
      Implementation impl = impl_arg(impl_name);
      CollectiveSpec spec{kind, parse_size(size_text), gpus, false};
      NodeTopology topo = topology_for(g, gpus);
      CostModel cost = cost_for(g);
      CommandProgram program = compile(impl, spec, topo);
      auto validation = validate_program(program, topo);
      if (!validation.ok) {
        std::cerr << "invalid program: " << validation.violation->message
                  << "\n";
        return 1;
      }
      Timeline tl = gemm_ns >= 0
                        ? simulate_sync_chain(gemm_ns, program, topo, cost)
                        : simulate(program, topo, cost);
      write_or_print(g.out_path, timeline_csv_header() +
                                     timeline_csv_row(tl, program));
      if (gemm_ns >= 0)
        std::cout << "sync chain overhead: " << tl.sync_chain_overhead_ns
                  << " ns\n";
      if (!trace_path.empty())
        write_or_print(trace_path, export_trace_json(tl, program));
      return 0;
    }
    if (cmd_sweep->parsed()) {
      SweepConfig config;
      config.kind = kind_arg(collective);
      for (const std::string& name : impl_list)
        config.implementations.push_back(impl_arg(name));
      config.size_start = parse_size(start_text);
      config.size_end = parse_size(end_text);
      config.gpu_count = gpus;
      config.seed = g.seed;
      config.jobs = g.jobs;
      NodeTopology topo = topology_for(g, gpus);
      SweepResult result = run_sweep(config, topo, cost_for(g));
      write_or_print(g.out_path, result.csv);
      if (!summary_path.empty()) write_or_print(summary_path, result.summary);
      return 0;
    }
    if (cmd_select->parsed()) {
      NodeTopology topo = topology_for(g, gpus);
      SelectionTable table =
          selection_table(kind_arg(collective), gpus, topo, cost_for(g));
      write_or_print(g.out_path, table.rendered);
      return 0;
    }
    if (cmd_cal->parsed()) {
      NodeTopology topo = topology_for(g, 8);
      CalibrationResult result =
          calibrate(CalibrationTargets{}, topo, g.seed, iterations);
      std::cerr << result.report;
      write_or_print(g.out_path, serialize_cost_model(result.model));
      return result.satisfied ? 0 : 1;
    }
    if (cmd_overlay->parsed()) {
      std::ifstream sweep_in(sweep_path), ref_in(reference_path);
      if (!sweep_in) throw std::runtime_error("cannot open " + sweep_path);
      if (!ref_in) throw std::runtime_error("cannot open " + reference_path);
      std::stringstream sweep_buf, ref_buf;
      sweep_buf << sweep_in.rdbuf();
      ref_buf << ref_in.rdbuf();
      OverlayResult result = overlay_reference(sweep_buf.str(), ref_buf.str());
      for (const std::string& w : result.warnings)
        std::cerr << "warning: " << w << "\n";
      write_or_print(g.out_path, result.csv);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
