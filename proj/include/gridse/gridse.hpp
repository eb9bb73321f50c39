#pragma once

#include "gridse/assembly.hpp"
#include "gridse/case_io.hpp"
#include "gridse/csr.hpp"
#include "gridse/errors.hpp"
#include "gridse/estimator.hpp"
#include "gridse/graph_engine.hpp"
#include "gridse/measurement.hpp"
#include "gridse/network_model.hpp"
#include "gridse/sparse_linalg.hpp"
#include "gridse/types.hpp"
