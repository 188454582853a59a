// SPDX-License-Identifier: Apache-2.0
#include "scaopo/plotdata.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "scaopo/error.hpp"

namespace scaopo {
namespace {

namespace fs = std::filesystem;

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string where(const fs::path& path, std::size_t row) { return path.string() + ":" + std::to_string(row) + ": "; }

double to_double(const std::string& s, const fs::path& path, std::size_t row) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where(path, row) + "'" + s + "' is not a number");
  }
}

long long to_int(const std::string& s, const fs::path& path, std::size_t row) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError(where(path, row) + "'" + s + "' is not an integer");
  return v;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

constexpr const char* kHeader = "series,iteration,env_steps,value,lo,hi";

struct RunData {
  std::string series;
  AggregateCurve curve;
  std::vector<double> limits;                      // mean over seeds
  std::vector<std::array<double, 3>> baseline;     // per cost: mean, min, max
};

RunData load_run(const fs::path& dir) {
  const fs::path summary_path = dir / "summary.json";
  std::ifstream is(summary_path);
  if (!is) throw ConfigError("cannot open " + summary_path.string());
  nlohmann::json summary;
  try {
    summary = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(summary_path.string() + ": " + e.what());
  }
  RunData run;
  const std::string tag = summary.value("tag", std::string());
  if (tag.empty()) throw ConfigError(summary_path.string() + ": missing 'tag'");
  run.series = tag;
  run.curve = read_aggregate_csv(dir / (tag + "_aggregate.csv"));
  const auto& seeds = summary.value("seeds", nlohmann::json::array());
  std::size_t counted = 0;
  for (const auto& s : seeds) {
    if (!s.contains("limits")) continue;
    const auto l = s.at("limits").get<std::vector<double>>();
    if (run.limits.empty()) run.limits.assign(l.size(), 0.0);
    if (l.size() != run.limits.size()) throw ConfigError(summary_path.string() + ": seeds disagree on the limit count");
    for (std::size_t i = 0; i < l.size(); ++i) run.limits[i] += l[i];
    ++counted;
  }
  for (double& l : run.limits) l /= static_cast<double>(counted);
  if (summary.contains("baseline")) {
    std::vector<std::vector<double>> per_cost;
    for (const auto& b : summary.at("baseline")) {
      if (!b.contains("costs")) continue;
      const auto c = b.at("costs").get<std::vector<double>>();
      if (per_cost.empty()) per_cost.resize(c.size());
      if (c.size() != per_cost.size()) throw ConfigError(summary_path.string() + ": baseline cost counts disagree");
      for (std::size_t i = 0; i < c.size(); ++i) per_cost[i].push_back(c[i]);
    }
    for (const auto& v : per_cost) {
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      run.baseline.push_back({mean, *std::min_element(v.begin(), v.end()), *std::max_element(v.begin(), v.end())});
    }
  }
  return run;
}

}  // namespace

AggregateCurve read_aggregate_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw ConfigError(where(path, 1) + "missing header");
  const std::vector<std::string> header = split(line);
  if (header.size() < 3 || header[0] != "iteration" || header[1] != "env_steps" || header[2] != "seeds" ||
      (header.size() - 3) % 2 != 0)
    throw ConfigError(where(path, 1) + "expected header iteration,env_steps,seeds,cost_<i>_mean,cost_<i>_std,...");
  const std::size_t n = (header.size() - 3) / 2;
  for (std::size_t i = 0; i < n; ++i)
    if (header[3 + 2 * i] != "cost_" + std::to_string(i) + "_mean" || header[4 + 2 * i] != "cost_" + std::to_string(i) + "_std")
      throw ConfigError(where(path, 1) + "unexpected column '" + header[3 + 2 * i] + "'");
  AggregateCurve c;
  c.mean.resize(n);
  c.std.resize(n);
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != header.size())
      throw ConfigError(where(path, row) + "expected " + std::to_string(header.size()) + " columns, found " +
                        std::to_string(cells.size()));
    c.iteration.push_back(to_int(cells[0], path, row));
    c.env_steps.push_back(to_int(cells[1], path, row));
    to_int(cells[2], path, row);
    for (std::size_t i = 0; i < n; ++i) {
      c.mean[i].push_back(to_double(cells[3 + 2 * i], path, row));
      c.std[i].push_back(to_double(cells[4 + 2 * i], path, row));
    }
  }
  return c;
}

std::vector<fs::path> emit_plotdata(const std::vector<fs::path>& run_dirs, const fs::path& out_dir) {
  std::vector<RunData> runs;
  std::map<std::string, int> names;
  for (const fs::path& dir : run_dirs) {
    runs.push_back(load_run(dir));
    if (names[runs.back().series]++) runs.back().series += ":" + dir.filename().string();
  }
  std::size_t n_costs = 1;
  for (const RunData& r : runs) n_costs = std::max(n_costs, r.curve.mean.size());

  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  for (std::size_t i = 0; i < n_costs; ++i) {
    const fs::path path = out_dir / ("cost_" + std::to_string(i) + ".csv");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << kHeader << '\n';
    for (const RunData& r : runs) {
      if (i >= r.curve.mean.size()) continue;
      const AggregateCurve& c = r.curve;
      for (std::size_t k = 0; k < c.iteration.size(); ++k)
        os << r.series << ',' << c.iteration[k] << ',' << c.env_steps[k] << ',' << fmt(c.mean[i][k]) << ','
           << fmt(c.mean[i][k] - c.std[i][k]) << ',' << fmt(c.mean[i][k] + c.std[i][k]) << '\n';
      if (c.iteration.empty()) continue;
      // Horizontal references span the first and last iteration.
      const std::size_t ends[2] = {0, c.iteration.size() - 1};
      if (i < r.baseline.size())
        for (std::size_t k : ends)
          os << "baseline," << c.iteration[k] << ',' << c.env_steps[k] << ',' << fmt(r.baseline[i][0]) << ','
             << fmt(r.baseline[i][1]) << ',' << fmt(r.baseline[i][2]) << '\n';
      if (i >= 1 && i - 1 < r.limits.size())
        for (std::size_t k : ends)
          os << "limit," << c.iteration[k] << ',' << c.env_steps[k] << ',' << fmt(r.limits[i - 1]) << ','
             << fmt(r.limits[i - 1]) << ',' << fmt(r.limits[i - 1]) << '\n';
    }
    written.push_back(path);
  }
  return written;
}

std::vector<PlotRow> read_plot_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != kHeader) throw ConfigError(where(path, 1) + "expected header " + kHeader);
  std::vector<PlotRow> rows;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != 6) throw ConfigError(where(path, row) + "expected 6 columns");
    rows.push_back({cells[0], to_int(cells[1], path, row), to_int(cells[2], path, row), to_double(cells[3], path, row),
                    to_double(cells[4], path, row), to_double(cells[5], path, row)});
  }
  return rows;
}

}  // namespace scaopo
