#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace gridse {

enum class MeasurementKind : std::uint8_t {
  voltage,      // V_i
  p_injection,  // P_i
  q_injection,  // Q_i
  p_flow,       // P_ij measured at the i end
  q_flow,       // Q_ij measured at the i end
};

inline const char* kind_label(MeasurementKind k) {
  switch (k) {
    case MeasurementKind::voltage: return "V";
    case MeasurementKind::p_injection: return "PI";
    case MeasurementKind::q_injection: return "QI";
    case MeasurementKind::p_flow: return "PF";
    case MeasurementKind::q_flow: return "QF";
  }
  return "?";
}

// Locations use external bus ids. For flows, `to` names the far end and
// `circuit` (1-based) disambiguates parallel branches; injections and
// voltages leave to = 0.
struct Measurement {
  MeasurementKind kind;
  int bus = 0;
  int to = 0;
  int circuit = 1;
  double value = 0.0;   // p.u.
  double sigma2 = 0.0;  // variance, p.u.^2

  bool operator==(const Measurement&) const = default;
};

struct MeasurementSet {
  std::vector<Measurement> measurements;
  // node_partition[i] lists indices into `measurements` forming z_i;
  // filled by partition_by_node, empty until then.
  std::vector<std::vector<std::size_t>> node_partition;

  std::size_t size() const { return measurements.size(); }

  bool operator==(const MeasurementSet& other) const {
    return measurements == other.measurements;
  }
};

// Per-bus voltage magnitudes (p.u.) and angles (radians), dense over
// internal vertex indices.
struct SystemState {
  std::vector<double> v;
  std::vector<double> theta;

  bool operator==(const SystemState&) const = default;
};

// Wall-clock per stage, in milliseconds. The two *_total fields are sums
// across iterations; reports divide them by the iteration count.
struct StageTimings {
  double gain_formulation_ms = 0.0;
  double factorization_ms = 0.0;
  double residual_substitution_total_ms = 0.0;
  double rhs_total_ms = 0.0;
  double total_ms = 0.0;
};

struct EstimationResult {
  SystemState state;
  std::size_t iterations = 0;
  bool converged = false;
  double mse = 0.0;
  double objective = 0.0;
  StageTimings timings;
  // Numeric factorizations performed (decoupled mode does exactly one
  // per side).
  std::size_t factorization_count = 0;
};

}  // namespace gridse
