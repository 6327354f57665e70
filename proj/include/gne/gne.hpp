#pragma once

#include "gne/model.hpp"
#include "gne/stepsizes.hpp"
#include "gne/operators.hpp"
#include "gne/diagnostics.hpp"
#include "gne/sync_solver.hpp"
#include "gne/async_sim.hpp"
#include "gne/benchmarks.hpp"
#include "gne/config.hpp"
#include "gne/cli.hpp"
