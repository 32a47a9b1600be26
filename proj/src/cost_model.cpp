#include "dmasim/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dmasim {
namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Field {
  const char* key;
  double CostModel::* member;
};

constexpr Field kFields[] = {
    {"t_ctl_ns", &CostModel::t_ctl},
    {"t_db_ns", &CostModel::t_db},
    {"t_fetch_ns", &CostModel::t_fetch},
    {"t_copy_fixed_ns", &CostModel::t_copy_fixed},
    {"t_sig_ns", &CostModel::t_sig},
    {"t_obs_ns", &CostModel::t_obs},
    {"t_scan_ns", &CostModel::t_scan},
    {"t_trig_ns", &CostModel::t_trig},
    {"t_poll_lat_ns", &CostModel::t_poll_lat},
    {"t_stream_sig_ns", &CostModel::t_stream_sig},
    {"t_host_fwd_ns", &CostModel::t_host_fwd},
    {"engine_throughput_cap_bytes_per_s", &CostModel::engine_throughput_cap},
    {"prelaunch_gain_threshold", &CostModel::prelaunch_gain_threshold},
};

}  // namespace

void validate_cost_model(const CostModel& cost, const NodeTopology& topo) {
  for (const Field& f : kFields) {
    if (cost.*(f.member) < 0)
      throw std::invalid_argument(std::string("cost model: '") + f.key +
                                  "' must be >= 0");
  }
  // A single-flow pcpy must be able to saturate its link.
  if (cost.engine_throughput_cap < topo.link_bandwidth)
    throw std::invalid_argument(
        "cost model: engine throughput cap below link bandwidth");
}

double copy_duration(const CostModel& cost, const DmaCommand& command,
                     double link_rate) {
  if (!(link_rate > 0))
    throw std::invalid_argument("copy_duration: rate must be positive");
  if (!command.is_data_movement())
    return 0;  // signals/polls/timestamps carry no payload
  const double cap = cost.engine_throughput_cap;
  double per_flow = 0;
  switch (command.kind) {
    case CommandKind::Copy:
      per_flow = std::min(link_rate, cap);
      break;
    case CommandKind::Broadcast:
    case CommandKind::Swap:
      // Two equal flows share the engine; each is also link-capped.
      per_flow = std::min(link_rate, cap / 2);
      break;
    default:
      return 0;
  }
  return cost.t_copy_fixed +
         static_cast<double>(command.size) / per_flow * 1e9;
}

CostModel load_cost_model(std::istream& in) {
  CostModel cost;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) continue;
    if (key == "calibration_seed") {
      cost.calibration_seed = std::stoull(value);
      continue;
    }
    bool known = false;
    for (const Field& f : kFields) {
      if (key == f.key) {
        cost.*(f.member) = std::stod(value);
        known = true;
        break;
      }
    }
    if (!known)
      throw std::invalid_argument("cost model: unknown key '" + key + "'");
  }
  return cost;
}

CostModel load_cost_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open cost model file: " + path);
  return load_cost_model(in);
}

std::string serialize_cost_model(const CostModel& cost) {
  std::ostringstream out;
  for (const Field& f : kFields)
    out << f.key << " = " << fmt_double(cost.*(f.member)) << "\n";
  out << "calibration_seed = " << cost.calibration_seed << "\n";
  return out.str();
}

}  // namespace dmasim
