#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "gridse/gridse.hpp"

namespace fixtures {

inline std::string data_path(const std::string& name) {
  return std::string(GRIDSE_DATA_DIR) + "/" + name;
}

inline gridse::NetworkCase load_case(const std::string& name) {
  std::ifstream in(data_path(name));
  if (!in) throw std::runtime_error("missing fixture " + name);
  return gridse::parse_case(in);
}

inline gridse::SystemState truth_state(const gridse::NetworkCase& nc) {
  gridse::SystemState s;
  for (const auto& b : nc.buses) {
    s.v.push_back(b.v_true);
    s.theta.push_back(b.theta_true);
  }
  return s;
}

}  // namespace fixtures
