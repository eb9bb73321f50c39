#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "gridse/errors.hpp"
#include "gridse/types.hpp"

namespace gridse {

enum class BusType : std::uint8_t { slack, pv, pq };

struct RawBus {
  int id = 0;
  BusType bus_type = BusType::pq;
  double v_true = 1.0;      // p.u.
  double theta_true = 0.0;  // radians
  double gs = 0.0;          // shunt conductance, p.u.
  double bs = 0.0;          // shunt susceptance, p.u.

  bool operator==(const RawBus&) const = default;
};

struct RawBranch {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  double b_charging = 0.0;  // total line charging susceptance
  double tap = 1.0;         // from-side off-nominal ratio

  bool operator==(const RawBranch&) const = default;
};

struct NetworkCase {
  double base_mva = 100.0;
  std::vector<RawBus> buses;
  std::vector<RawBranch> branches;

  bool operator==(const NetworkCase&) const = default;

  const RawBus* find_bus(int id) const {
    for (const auto& b : buses)
      if (b.id == id) return &b;
    return nullptr;
  }
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  if (auto pos = line.find('#'); pos != std::string_view::npos)
    line = line.substr(0, pos);
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i])))
      ++i;
    std::size_t j = i;
    while (j < line.size() &&
           !std::isspace(static_cast<unsigned char>(line[j])))
      ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline double parse_double(std::string_view tok, std::size_t line) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size())
    throw ParseError(ParseError::Kind::Syntax, line,
                     "expected number, got '" + std::string(tok) + "'");
  return v;
}

inline int parse_int(std::string_view tok, std::size_t line) {
  int v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size())
    throw ParseError(ParseError::Kind::Syntax, line,
                     "expected integer, got '" + std::string(tok) + "'");
  return v;
}

}  // namespace detail

// Case file: `BASEMVA`, optional `ANGLES degrees|radians`, then `BUS` and
// `BRANCH` sections with whitespace-separated columns. `#` starts a comment.
inline NetworkCase parse_case(std::istream& in) {
  NetworkCase nc;
  nc.base_mva = 0.0;
  enum class Section { none, bus, branch } section = Section::none;
  bool degrees = false;
  std::unordered_set<int> ids;
  std::string line;
  std::size_t lineno = 0;
  int slack_count = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto f = detail::split_fields(line);
    if (f.empty()) continue;
    if (f[0] == "BASEMVA") {
      if (f.size() != 2)
        throw ParseError(ParseError::Kind::Syntax, lineno,
                         "BASEMVA expects one value");
      nc.base_mva = detail::parse_double(f[1], lineno);
      if (!(nc.base_mva > 0.0))
        throw ParseError(ParseError::Kind::Syntax, lineno,
                         "base MVA must be positive");
      continue;
    }
    if (f[0] == "ANGLES") {
      if (f.size() != 2 || (f[1] != "degrees" && f[1] != "radians"))
        throw ParseError(ParseError::Kind::Syntax, lineno,
                         "ANGLES expects 'degrees' or 'radians'");
      degrees = (f[1] == "degrees");
      continue;
    }
    if (f[0] == "BUS" && f.size() == 1) {
      section = Section::bus;
      continue;
    }
    if (f[0] == "BRANCH" && f.size() == 1) {
      section = Section::branch;
      continue;
    }
    if (section == Section::bus) {
      if (f.size() != 6)
        throw ParseError(ParseError::Kind::Syntax, lineno,
                         "bus record expects 6 columns");
      RawBus b;
      b.id = detail::parse_int(f[0], lineno);
      if (f[1] == "slack")
        b.bus_type = BusType::slack;
      else if (f[1] == "pv")
        b.bus_type = BusType::pv;
      else if (f[1] == "pq")
        b.bus_type = BusType::pq;
      else
        throw ParseError(ParseError::Kind::Syntax, lineno,
                         "unknown bus type '" + std::string(f[1]) + "'");
      b.v_true = detail::parse_double(f[2], lineno);
      b.theta_true = detail::parse_double(f[3], lineno);
      if (degrees) b.theta_true *= std::numbers::pi / 180.0;
      b.gs = detail::parse_double(f[4], lineno);
      b.bs = detail::parse_double(f[5], lineno);
      if (!(b.v_true > 0.0))
        throw ParseError(ParseError::Kind::Syntax, lineno,
                         "bus voltage must be positive");
      if (!ids.insert(b.id).second)
        throw ParseError(ParseError::Kind::DuplicateBusId, lineno,
                         "duplicate bus id " + std::to_string(b.id));
      if (b.bus_type == BusType::slack) ++slack_count;
      nc.buses.push_back(b);
      continue;
    }
    if (section == Section::branch) {
      if (f.size() != 5 && f.size() != 6)
        throw ParseError(ParseError::Kind::Syntax, lineno,
                         "branch record expects 5 or 6 columns");
      RawBranch br;
      br.from = detail::parse_int(f[0], lineno);
      br.to = detail::parse_int(f[1], lineno);
      br.r = detail::parse_double(f[2], lineno);
      br.x = detail::parse_double(f[3], lineno);
      br.b_charging = detail::parse_double(f[4], lineno);
      br.tap = (f.size() == 6) ? detail::parse_double(f[5], lineno) : 1.0;
      if (br.r * br.r + br.x * br.x <= 0.0)
        throw ParseError(ParseError::Kind::Syntax, lineno,
                         "branch has zero series impedance");
      if (!(br.tap > 0.0))
        throw ParseError(ParseError::Kind::Syntax, lineno,
                         "tap ratio must be positive");
      if (!ids.contains(br.from))
        throw ParseError(ParseError::Kind::DanglingEndpoint, lineno,
                         "branch references unknown bus " +
                             std::to_string(br.from));
      if (!ids.contains(br.to))
        throw ParseError(ParseError::Kind::DanglingEndpoint, lineno,
                         "branch references unknown bus " +
                             std::to_string(br.to));
      nc.branches.push_back(br);
      continue;
    }
    throw ParseError(ParseError::Kind::Syntax, lineno,
                     "record outside BUS/BRANCH section");
  }
  if (!(nc.base_mva > 0.0))
    throw ParseError(ParseError::Kind::Syntax, lineno, "missing BASEMVA");
  if (slack_count == 0)
    throw ParseError(ParseError::Kind::MissingSlack, lineno,
                     "no slack bus declared");
  if (slack_count > 1)
    throw ParseError(ParseError::Kind::Syntax, lineno,
                     "more than one slack bus declared");
  return nc;
}

inline NetworkCase parse_case(const std::string& text) {
  std::istringstream in(text);
  return parse_case(in);
}

// Emits radians; re-parsing yields a structurally equal case.
inline void write_case(const NetworkCase& nc, std::ostream& os) {
  os.precision(17);
  os << "BASEMVA " << nc.base_mva << "\n";
  os << "BUS\n# id type v_true theta_true gs bs\n";
  for (const auto& b : nc.buses) {
    const char* t = b.bus_type == BusType::slack
                        ? "slack"
                        : (b.bus_type == BusType::pv ? "pv" : "pq");
    os << b.id << ' ' << t << ' ' << b.v_true << ' ' << b.theta_true << ' '
       << b.gs << ' ' << b.bs << '\n';
  }
  os << "BRANCH\n# from to r x b tap\n";
  for (const auto& br : nc.branches)
    os << br.from << ' ' << br.to << ' ' << br.r << ' ' << br.x << ' '
       << br.b_charging << ' ' << br.tap << '\n';
}

inline std::string write_case(const NetworkCase& nc) {
  std::ostringstream os;
  write_case(nc, os);
  return os.str();
}

namespace detail {

// Number of branches connecting buses a and b in either orientation.
inline int count_circuits(const NetworkCase& nc, int a, int b) {
  int n = 0;
  for (const auto& br : nc.branches)
    if ((br.from == a && br.to == b) || (br.from == b && br.to == a)) ++n;
  return n;
}

}  // namespace detail

// Measurement file: lines `KIND LOCATION VALUE SIGMA2` with KIND in
// {V, PI, QI, PF, QF}; LOCATION is `bus` or `from-to`, with an optional
// `@c` circuit suffix for parallel branches.
inline MeasurementSet parse_measurements(std::istream& in,
                                         const NetworkCase& nc) {
  MeasurementSet set;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto f = detail::split_fields(line);
    if (f.empty()) continue;
    if (f.size() != 4)
      throw ParseError(ParseError::Kind::Syntax, lineno,
                       "measurement record expects 4 columns");
    Measurement m;
    if (f[0] == "V")
      m.kind = MeasurementKind::voltage;
    else if (f[0] == "PI")
      m.kind = MeasurementKind::p_injection;
    else if (f[0] == "QI")
      m.kind = MeasurementKind::q_injection;
    else if (f[0] == "PF")
      m.kind = MeasurementKind::p_flow;
    else if (f[0] == "QF")
      m.kind = MeasurementKind::q_flow;
    else
      throw ParseError(ParseError::Kind::UnknownMeasurementKind, lineno,
                       "unknown measurement kind '" + std::string(f[0]) + "'");
    std::string_view loc = f[1];
    if (auto at = loc.find('@'); at != std::string_view::npos) {
      m.circuit = detail::parse_int(loc.substr(at + 1), lineno);
      loc = loc.substr(0, at);
    }
    bool is_flow = m.kind == MeasurementKind::p_flow ||
                   m.kind == MeasurementKind::q_flow;
    if (auto dash = loc.find('-'); dash != std::string_view::npos) {
      m.bus = detail::parse_int(loc.substr(0, dash), lineno);
      m.to = detail::parse_int(loc.substr(dash + 1), lineno);
      if (!is_flow)
        throw ParseError(ParseError::Kind::UnresolvableLocation, lineno,
                         "branch location on a bus measurement");
    } else {
      m.bus = detail::parse_int(loc, lineno);
      if (is_flow)
        throw ParseError(ParseError::Kind::UnresolvableLocation, lineno,
                         "flow measurement requires a from-to location");
    }
    m.value = detail::parse_double(f[2], lineno);
    m.sigma2 = detail::parse_double(f[3], lineno);
    if (!(m.sigma2 > 0.0))
      throw ParseError(ParseError::Kind::NonPositiveVariance, lineno,
                       "variance must be positive");
    if (!nc.find_bus(m.bus))
      throw ParseError(ParseError::Kind::UnresolvableLocation, lineno,
                       "unknown bus " + std::to_string(m.bus));
    if (is_flow) {
      int ckt = detail::count_circuits(nc, m.bus, m.to);
      if (ckt == 0 || m.circuit < 1 || m.circuit > ckt)
        throw ParseError(ParseError::Kind::UnresolvableLocation, lineno,
                         "no branch " + std::to_string(m.bus) + "-" +
                             std::to_string(m.to) + " circuit " +
                             std::to_string(m.circuit));
    }
    set.measurements.push_back(m);
  }
  return set;
}

inline MeasurementSet parse_measurements(const std::string& text,
                                         const NetworkCase& nc) {
  std::istringstream in(text);
  return parse_measurements(in, nc);
}

inline void write_measurements(const MeasurementSet& set, std::ostream& os) {
  os << "# kind location value sigma2\n";
  os.precision(17);
  for (const auto& m : set.measurements) {
    os << kind_label(m.kind) << ' ' << m.bus;
    if (m.kind == MeasurementKind::p_flow ||
        m.kind == MeasurementKind::q_flow) {
      os << '-' << m.to;
      if (m.circuit != 1) os << '@' << m.circuit;
    }
    os << ' ' << m.value << ' ' << m.sigma2 << '\n';
  }
}

inline std::string write_measurements(const MeasurementSet& set) {
  std::ostringstream os;
  write_measurements(set, os);
  return os.str();
}

inline nlohmann::json report_json(const EstimationResult& result) {
  double iters = result.iterations > 0
                     ? static_cast<double>(result.iterations)
                     : 1.0;
  return nlohmann::json{
      {"iterations", result.iterations},
      {"converged", result.converged},
      {"mse", result.mse},
      {"objective", result.objective},
      {"timings_ms",
       {{"gain_formulation", result.timings.gain_formulation_ms},
        {"factorization", result.timings.factorization_ms},
        {"residual_and_substitution_per_iter",
         result.timings.residual_substitution_total_ms / iters},
        {"rhs_per_iter", result.timings.rhs_total_ms / iters},
        {"total", result.timings.total_ms}}}};
}

inline void write_report(const EstimationResult& result, std::ostream& os) {
  os << report_json(result).dump(2) << '\n';
}

}  // namespace gridse
