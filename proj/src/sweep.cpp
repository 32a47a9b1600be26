#include "dmasim/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <sstream>
#include <thread>

#include "dmasim/verifier.hpp"

namespace dmasim {

std::int64_t parse_size(const std::string& text) {
  if (text.empty()) throw std::invalid_argument("empty size");
  std::int64_t mult = 1;
  std::string digits = text;
  switch (text.back()) {
    case 'K': case 'k': mult = 1ll << 10; digits.pop_back(); break;
    case 'M': case 'm': mult = 1ll << 20; digits.pop_back(); break;
    case 'G': case 'g': mult = 1ll << 30; digits.pop_back(); break;
    default: break;
  }
  size_t pos = 0;
  std::int64_t value = std::stoll(digits, &pos);
  if (pos != digits.size() || value <= 0)
    throw std::invalid_argument("bad size: " + text);
  return value * mult;
}

void validate_sweep_config(const SweepConfig& config) {
  if (config.size_start <= 0 || config.size_start > config.size_end)
    throw std::invalid_argument("sweep: need 0 < start <= end");
  if (!(config.size_step > 1))
    throw std::invalid_argument("sweep: step must be > 1");
  if (config.gpu_count < 2)
    throw std::invalid_argument("sweep: gpu_count must be >= 2");
  for (Implementation impl : config.implementations)
    if (!valid_for(impl, config.kind))
      throw std::invalid_argument(to_string(impl) + " does not apply to " +
                                  to_string(config.kind));
}

namespace {

std::vector<std::int64_t> size_grid(std::int64_t start, std::int64_t end,
                                    double step) {
  std::vector<std::int64_t> sizes;
  double s = static_cast<double>(start);
  while (true) {
    auto v = static_cast<std::int64_t>(std::llround(s));
    if (v > end) break;
    sizes.push_back(v);
    if (v == end) break;
    s *= step;
  }
  return sizes;
}

double geomean(const std::vector<double>& values) {
  if (values.empty()) return 0;
  double acc = 0;
  for (double v : values) acc += std::log(v);
  return std::exp(acc / values.size());
}

}  // namespace

SweepResult run_sweep(const SweepConfig& config, const NodeTopology& topo,
                      const CostModel& cost) {
  validate_sweep_config(config);
  std::vector<Implementation> impls = config.implementations;
  if (impls.empty()) impls = implementations_for(config.kind);
  const std::vector<std::int64_t> sizes =
      size_grid(config.size_start, config.size_end, config.size_step);

  struct Point {
    Implementation impl;
    std::int64_t size;
  };
  std::vector<Point> points;
  for (Implementation impl : impls)
    for (std::int64_t size : sizes) points.push_back({impl, size});

  SweepResult result;
  result.rows.resize(points.size());
  std::vector<std::string> errors(points.size());

  auto work = [&](size_t index) {
    const Point& p = points[index];
    CollectiveSpec spec{config.kind, p.size, config.gpu_count, false};
    CommandProgram program = compile(p.impl, spec, topo);
    auto validation = validate_program(program, topo);
    if (!validation.ok) {
      errors[index] = "validation failed: " + validation.violation->message;
      return;
    }
    VerifyOptions vo;
    vo.random_interleavings = config.verify_interleavings;
    vo.seed = config.seed + index;
    Verdict verdict = verify_collective(program, program.metadata.spec, vo);
    if (!verdict.ok()) {
      errors[index] = "verification failed: " + verdict.detail;
      return;
    }
    Timeline tl = simulate(program, topo, cost, {false});
    result.rows[index] = {p.impl, config.kind, config.gpu_count, p.size,
                          std::move(tl)};
  };

  const int jobs = std::max(1, config.jobs);
  if (jobs == 1) {
    for (size_t i = 0; i < points.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    for (int j = 0; j < jobs; ++j)
      pool.emplace_back([&] {
        for (size_t i = next++; i < points.size(); i = next++) work(i);
      });
    for (auto& t : pool) t.join();
  }
  for (size_t i = 0; i < points.size(); ++i)
    if (!errors[i].empty())
      throw std::runtime_error(to_string(points[i].impl) + " at " +
                               std::to_string(points[i].size) + " bytes: " +
                               errors[i]);

  // Rows are impl-major, size-minor: stable regardless of job count.
  std::ostringstream csv;
  csv << timeline_csv_header();
  std::map<std::pair<Implementation, std::int64_t>, double> time_of;
  for (const SweepRow& row : result.rows) {
    CollectiveSpec spec{config.kind, row.size_bytes, config.gpu_count, false};
    CommandProgram program = compile(row.impl, spec, topo);
    (void)program;
    time_of[{row.impl, row.size_bytes}] = row.timeline.total_ns();
  }
  for (const SweepRow& row : result.rows) {
    CollectiveSpec spec{config.kind, row.size_bytes, config.gpu_count, false};
    csv << timeline_csv_row(row.timeline, compile(row.impl, spec, topo));
  }
  result.csv = csv.str();

  std::ostringstream summary;
  summary << "# best implementation per size\n";
  for (std::int64_t size : sizes) {
    Implementation best = impls.front();
    double best_time = 0;
    bool first = true;
    for (Implementation impl : impls) {
      double t = time_of[{impl, size}];
      if (first || t < best_time) {
        best = impl;
        best_time = t;
        first = false;
      }
    }
    summary << size << "\t" << to_string(best) << "\t";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", best_time);
    summary << buf << "\n";
  }
  // Geomean prelaunch speedups over whichever base/prelaunch pairs ran.
  summary << "# geomean speedup of prelaunch_X over X\n";
  for (Implementation impl : impls) {
    if (is_prelaunched(impl)) continue;
    Implementation pre = prelaunch_of(impl);
    if (std::find(impls.begin(), impls.end(), pre) == impls.end()) continue;
    std::vector<double> ratios;
    for (std::int64_t size : sizes) {
      double base = time_of[{impl, size}];
      double fast = time_of[{pre, size}];
      if (base > 0 && fast > 0) ratios.push_back(base / fast);
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", geomean(ratios));
    summary << to_string(impl) << "\t" << buf << "\n";
  }
  result.summary = summary.str();
  return result;
}

WinnerGrid winner_grid(CollectiveKind kind, int gpus, const NodeTopology& topo,
                       const CostModel& cost, std::int64_t size_lo,
                       std::int64_t size_hi) {
  const Implementation mid = kind == CollectiveKind::AllGather
                                 ? Implementation::PrelaunchBcst
                                 : Implementation::PrelaunchSwap;
  const std::vector<Implementation> candidates = {
      Implementation::PrelaunchB2b, mid, Implementation::PrelaunchPcpy,
      Implementation::Pcpy};
  WinnerGrid grid;
  grid.sizes = size_grid(size_lo, size_hi, 2.0);
  for (std::int64_t size : grid.sizes) {
    CollectiveSpec spec{kind, size, gpus, false};
    std::map<Implementation, double> times;
    for (Implementation impl : candidates)
      times[impl] =
          simulate(compile(impl, spec, topo), topo, cost, {false}).total_ns();
    Implementation best = candidates.front();
    for (Implementation impl : candidates)
      if (times[impl] < times[best]) best = impl;
    // Prefer the plain variant when prelaunch buys almost nothing: it
    // needs no ahead-of-time knowledge of buffers and operator order.
    if (is_prelaunched(best)) {
      Implementation plain = base_of(best);
      if (times.count(plain) &&
          times[plain] <=
              times[best] * (1 + cost.prelaunch_gain_threshold))
        best = plain;
    }
    grid.winners.push_back(best);
  }
  return grid;
}

std::optional<std::int64_t> boundary_between(const WinnerGrid& grid,
                                             Implementation from,
                                             Implementation to) {
  for (size_t i = 1; i < grid.sizes.size(); ++i)
    if (grid.winners[i - 1] == from && grid.winners[i] == to)
      return grid.sizes[i];
  return std::nullopt;
}

SelectionTable selection_table(CollectiveKind kind, int gpus,
                               const NodeTopology& topo,
                               const CostModel& cost) {
  WinnerGrid grid = winner_grid(kind, gpus, topo, cost);
  SelectionTable table;

  // Degenerate model: every candidate ties (e.g. the pure fluid limit).
  {
    CollectiveSpec spec{kind, grid.sizes.front(), gpus, false};
    std::vector<double> times;
    for (Implementation impl :
         {Implementation::PrelaunchB2b, Implementation::PrelaunchPcpy,
          Implementation::Pcpy})
      times.push_back(
          simulate(compile(impl, spec, topo), topo, cost, {false}).total_ns());
    double lo = *std::min_element(times.begin(), times.end());
    double hi = *std::max_element(times.begin(), times.end());
    table.degenerate = hi - lo <= lo * 1e-9;
  }

  table.all_match = true;
  for (size_t i = 0; i < grid.sizes.size();) {
    size_t j = i;
    while (j < grid.sizes.size() && grid.winners[j] == grid.winners[i]) ++j;
    SelectionRange range;
    range.lo = grid.sizes[i];
    range.hi = j < grid.sizes.size() ? grid.sizes[j] : 0;
    range.simulated = grid.winners[i];
    range.prescribed = select_implementation(kind, range.lo);
    range.match = range.simulated == range.prescribed;
    table.all_match = table.all_match && range.match;
    table.ranges.push_back(range);
    i = j;
  }
  // a model where everything ties matches the prescription only by accident
  if (table.degenerate) table.all_match = false;

  std::ostringstream out;
  out << "collective: " << to_string(kind) << ", gpus: " << gpus << "\n";
  if (table.degenerate)
    out << "warning: degenerate model (all implementations tie)\n";
  out << "size range              simulated        prescribed       match\n";
  for (const SelectionRange& r : table.ranges) {
    char lo[32], hi[32];
    std::snprintf(lo, sizeof(lo), "%lld", static_cast<long long>(r.lo));
    if (r.hi > 0)
      std::snprintf(hi, sizeof(hi), "%lld", static_cast<long long>(r.hi));
    else
      std::snprintf(hi, sizeof(hi), "inf");
    char line[160];
    std::snprintf(line, sizeof(line), "[%s, %s)%*s %-16s %-16s %s\n", lo, hi,
                  std::max(0, 20 - static_cast<int>(strlen(lo) + strlen(hi))),
                  "", to_string(r.simulated).c_str(),
                  to_string(r.prescribed).c_str(), r.match ? "yes" : "NO");
    out << line;
  }
  table.rendered = out.str();
  return table;
}

namespace {

std::vector<std::map<std::string, std::string>> parse_csv(
    const std::string& text) {
  std::vector<std::map<std::string, std::string>> rows;
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
      line.pop_back();
    if (line.empty()) continue;
    if (header.empty()) {
      header = split(line);
      continue;
    }
    auto cells = split(line);
    std::map<std::string, std::string> row;
    for (size_t i = 0; i < header.size() && i < cells.size(); ++i)
      row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

OverlayResult overlay_reference(const std::string& sweep_csv,
                                const std::string& reference_csv) {
  OverlayResult result;
  auto sweep_rows = parse_csv(sweep_csv);
  auto ref_rows = parse_csv(reference_csv);
  std::map<std::pair<std::string, std::int64_t>, double> reference;
  for (const auto& row : ref_rows) {
    auto coll = row.find("collective");
    auto size = row.find("size_bytes");
    auto total = row.find("total_ns");
    if (coll == row.end() || size == row.end() || total == row.end()) {
      result.warnings.push_back("reference row missing required columns");
      continue;
    }
    reference[{coll->second, std::stoll(size->second)}] =
        std::stod(total->second);
  }
  if (reference.empty())
    result.warnings.push_back("reference is empty; nothing joined");

  std::ostringstream csv;
  csv << "collective,size_bytes,impl,total_ns,reference_ns,ratio\n";
  for (const auto& row : sweep_rows) {
    auto coll = row.find("collective");
    auto size = row.find("size_bytes");
    auto total = row.find("total_ns");
    auto impl = row.find("impl");
    if (coll == row.end() || size == row.end() || total == row.end()) continue;
    std::int64_t bytes = std::stoll(size->second);
    auto key = std::make_pair(coll->second, bytes);
    auto ref = reference.find(key);
    if (ref == reference.end()) {
      result.warnings.push_back("no reference for " + coll->second + " @ " +
                                size->second);
      continue;
    }
    OverlayRow out;
    out.collective = coll->second;
    out.size_bytes = bytes;
    out.impl = impl == row.end() ? "" : impl->second;
    out.total_ns = std::stod(total->second);
    out.reference_ns = ref->second;
    out.ratio = out.reference_ns > 0 ? out.total_ns / out.reference_ns : 0;
    result.rows.push_back(out);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%lld,%s,%.3f,%.3f,%.6f\n",
                  out.collective.c_str(), static_cast<long long>(bytes),
                  out.impl.c_str(), out.total_ns, out.reference_ns, out.ratio);
    csv << buf;
  }
  result.csv = csv.str();
  return result;
}

}  // namespace dmasim
