/// @file
/// @brief Umbrella header. io.hpp is left out since it needs nlohmann/json.
#pragma once

#include "scotm/core.hpp"
#include "scotm/feasibility.hpp"
#include "scotm/metrics.hpp"
#include "scotm/objective.hpp"
#include "scotm/oracle.hpp"
#include "scotm/projections.hpp"
#include "scotm/solver.hpp"
#include "scotm/support.hpp"
