#pragma once

#include "hge/gradcheck.hpp"
#include "hge/graph.hpp"
#include "hge/config.hpp"

namespace hge {

// Deterministic 20-node labeled graph with 8-dim features; the gradient-check
// target.
Graph fixture_graph_20();

// Config the fixture check runs under: L=2, K=(4,2), 8-dim states, 2 heads.
TrainConfig fixture_gradcheck_config();

// Central-difference check of the full joint objective against the tape
// gradients, every parameter group included, all sampling frozen.
GradCheckReport run_fixture_gradcheck(const TrainConfig& cfg, double eps = 1e-4);

}  // namespace hge
