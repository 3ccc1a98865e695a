// Copyright 2026 The kaprobe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "kaprobe/planner.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "kaprobe/conncheck.hpp"
#include "kaprobe/errors.hpp"

namespace kaprobe {
namespace {

double rtt_max_of(const PlannerInput& in) {
  return in.rtt_max_ms < 0.0 ? in.rtt_avg_ms : in.rtt_max_ms;
}

// Upper bound on T_KA imposed by the responsiveness target.
double responsiveness_bound_ms(const PlannerInput& in, int k) {
  if (in.worst_case) return (in.t_ravg_max_ms - rtt_max_of(in)) / (k + 1.0);
  return (in.t_ravg_max_ms - in.rtt_avg_ms / 2.0) / (k + 0.5);
}

// Largest multiple of the granularity strictly below `bound`.
double grid_below(double bound, double step) {
  double n = std::floor(bound / step);
  if (n * step >= bound - 1e-9 * std::max(1.0, bound)) n -= 1.0;
  return n * step;
}

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void PlannerInput::validate() const {
  auto fail = [](const char* what) { throw InputError(what); };
  if (!(p_loss > 0.0 && p_loss < 1.0)) fail("p_loss must lie in (0, 1)");
  if (!(rtt_avg_ms > 0.0)) fail("rtt_avg must be positive");
  if (!(t_fp_min_s > 0.0)) fail("t_fp_min must be positive");
  if (!(t_ka_min_ms >= 0.0)) fail("t_ka_min must be non-negative");
  if (k_max < 1) fail("k_max must be at least 1");
  if (!(granularity_ms > 0.0)) fail("granularity must be positive");
  if (!(t_ravg_max_ms > rtt_avg_ms / 2.0)) {
    fail("t_ravg_max must exceed rtt_avg / 2");
  }
  if (worst_case && !(t_ravg_max_ms > rtt_max_of(*this))) {
    fail("worst-case target must exceed rtt_max");
  }
}

PlannerResult solve(const PlannerInput& input) {
  input.validate();
  PlannerResult result;
  const double unacked = 2.0 * input.p_loss - input.p_loss * input.p_loss;

  for (int k = 1; k <= input.k_max; ++k) {
    const double bound = responsiveness_bound_ms(input, k);
    const double fp_floor_ms = input.t_fp_min_s * 1000.0 * std::pow(unacked, k);
    if (!(fp_floor_ms < bound)) continue;
    const double operational = grid_below(bound, input.granularity_ms);
    if (!(fp_floor_ms < operational)) continue;

    result.k_star = k;
    result.t_ka_star_ms = bound;
    result.t_ka_operational_ms = operational;
    result.feasible = operational >= input.t_ka_min_ms && operational > 0.0;
    result.p_fp = false_positive_prob(input.p_loss, k);
    result.t_fp_s = (operational / 1000.0) / result.p_fp;
    const Responsiveness r =
        responsiveness(k, operational, rtt_max_of(input), input.rtt_avg_ms);
    result.t_ravg_ms = r.average_ms;
    result.t_rmax_ms = r.worst_ms;
    return result;
  }
  return result;
}

SweepSpec parse_sweep(std::string_view text) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : text) {
    if (c == ':') {
      parts.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  parts.push_back(current);
  if (parts.size() < 3 || parts.size() > 5) {
    throw InputError("sweep must be <variable>:<from>:<to>[:<points>[:log]]");
  }

  SweepSpec range;
  const std::string& var = parts[0];
  if (var == "K" || var == "k") {
    range.variable = SweepVariable::kK;
  } else if (var == "p_loss") {
    range.variable = SweepVariable::kPLoss;
  } else if (var == "t_fp_min") {
    range.variable = SweepVariable::kTfpMin;
  } else if (var == "t_ravg_max") {
    range.variable = SweepVariable::kTRavgMax;
  } else {
    throw InputError("unknown sweep variable '" + var + "'");
  }
  try {
    range.from = std::stod(parts[1]);
    range.to = std::stod(parts[2]);
    if (parts.size() >= 4) range.points = std::stoi(parts[3]);
  } catch (const std::exception&) {
    throw InputError("malformed sweep range '" + std::string(text) + "'");
  }
  if (parts.size() == 5) {
    if (parts[4] != "log") throw InputError("sweep scale must be 'log'");
    range.log_scale = true;
  }
  if (range.variable == SweepVariable::kK) {
    range.points = static_cast<int>(range.to) - static_cast<int>(range.from) + 1;
  }
  if (range.points < 1 || !(range.to >= range.from)) {
    throw InputError("sweep range is empty");
  }
  if (range.log_scale && !(range.from > 0.0)) {
    throw InputError("log sweep needs a positive start");
  }
  return range;
}

std::string CurveTable::to_csv() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    out << (i ? "," : "") << columns[i];
  }
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << (i ? "," : "") << format_number(row[i]);
    }
    out << '\n';
  }
  return out.str();
}

CurveTable tradeoff_curves(const PlannerInput& input, const SweepSpec& sweep) {
  CurveTable table;
  if (sweep.variable == SweepVariable::kK) {
    if (!(sweep.fixed_t_ka_ms > 0.0)) throw InputError("fixed T_KA must be positive");
    table.columns = {"K", "t_ravg_ms", "t_rmax_ms", "p_fp", "t_fp_s"};
    const int first = std::max(1, static_cast<int>(sweep.from));
    const int last = static_cast<int>(sweep.to);
    const double rtt_max = rtt_max_of(input);
    for (int k = first; k <= last; ++k) {
      const Responsiveness r =
          responsiveness(k, sweep.fixed_t_ka_ms, rtt_max, input.rtt_avg_ms);
      const auto t_fp = false_positive_interval_s(input.p_loss, k, sweep.fixed_t_ka_ms);
      table.rows.push_back({static_cast<double>(k), r.average_ms, r.worst_ms,
                            false_positive_prob(input.p_loss, k),
                            t_fp ? *t_fp : std::numeric_limits<double>::infinity()});
    }
    return table;
  }

  static const char* const kNames[] = {"K", "p_loss", "t_fp_min_s", "t_ravg_max_ms"};
  table.columns = {kNames[static_cast<int>(sweep.variable)], "k_star",
                   "t_ka_star_ms", "t_ka_operational_ms", "feasible"};
  for (int i = 0; i < sweep.points; ++i) {
    const double frac = sweep.points == 1 ? 0.0 : static_cast<double>(i) / (sweep.points - 1);
    const double value =
        sweep.log_scale
            ? sweep.from * std::pow(sweep.to / sweep.from, frac)
            : sweep.from + (sweep.to - sweep.from) * frac;
    PlannerInput point = input;
    switch (sweep.variable) {
      case SweepVariable::kPLoss: point.p_loss = value; break;
      case SweepVariable::kTfpMin: point.t_fp_min_s = value; break;
      case SweepVariable::kTRavgMax: point.t_ravg_max_ms = value; break;
      case SweepVariable::kK: break;
    }
    const PlannerResult r = solve(point);
    table.rows.push_back({value, static_cast<double>(r.k_star), r.t_ka_star_ms,
                          r.t_ka_operational_ms, r.feasible ? 1.0 : 0.0});
  }
  return table;
}

}  // namespace kaprobe
