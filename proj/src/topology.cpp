#include "dmasim/topology.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dmasim {
namespace {

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("topology: bad numeric value for '" + key +
                                "': " + value);
  }
}

int parse_int(const std::string& key, const std::string& value) {
  double v = parse_double(key, value);
  if (v != std::floor(v))
    throw std::invalid_argument("topology: '" + key + "' must be an integer");
  return static_cast<int>(v);
}

// Doubles are printed with enough digits to round-trip bit-exactly.
std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void apply_key(NodeTopology& topo, const std::string& key,
               const std::string& value) {
  if (key == "gpu_count") {
    topo.gpu_count = parse_int(key, value);
  } else if (key == "engines_per_gpu") {
    topo.engines_per_gpu = parse_int(key, value);
  } else if (key == "link_bandwidth_bytes_per_s") {
    topo.link_bandwidth = parse_double(key, value);
  } else if (key == "engine_throughput_cap_bytes_per_s") {
    topo.engine_throughput_cap = parse_double(key, value);
  } else {
    throw std::invalid_argument("topology: unknown key '" + key + "'");
  }
}

}  // namespace

void validate_topology(const NodeTopology& topo) {
  if (topo.gpu_count < 2)
    throw std::invalid_argument("topology: gpu_count must be >= 2");
  if (topo.engines_per_gpu < 1)
    throw std::invalid_argument("topology: engines_per_gpu must be >= 1");
  if (!(topo.link_bandwidth > 0))
    throw std::invalid_argument("topology: link_bandwidth must be positive");
  if (!(topo.engine_throughput_cap > 0))
    throw std::invalid_argument(
        "topology: engine_throughput_cap must be positive");
  if (topo.host_count != 1)
    throw std::invalid_argument("topology: exactly one host is modeled");
}

NodeTopology build_topology(int gpu_count,
                            const std::map<std::string, std::string>& overrides) {
  NodeTopology topo;
  topo.gpu_count = gpu_count;
  for (const auto& [key, value] : overrides) apply_key(topo, key, value);
  validate_topology(topo);
  return topo;
}

NodeTopology load_topology(std::istream& in) {
  NodeTopology topo;
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
    apply_key(topo, key, value);
  }
  validate_topology(topo);
  return topo;
}

NodeTopology load_topology_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open topology file: " + path);
  return load_topology(in);
}

std::string serialize_topology(const NodeTopology& topo) {
  std::ostringstream out;
  out << "gpu_count = " << topo.gpu_count << "\n"
      << "engines_per_gpu = " << topo.engines_per_gpu << "\n"
      << "link_bandwidth_bytes_per_s = " << fmt_double(topo.link_bandwidth)
      << "\n"
      << "engine_throughput_cap_bytes_per_s = "
      << fmt_double(topo.engine_throughput_cap) << "\n";
  return out.str();
}

}  // namespace dmasim
