#pragma once

// Umbrella header for the pqos-sim library: a deterministic single-cell
// uplink simulator plus a from-scratch double-DQN stack for choosing LiDAR
// compression levels under latency and fidelity constraints.

#include "pqos/action.hpp"
#include "pqos/config.hpp"
#include "pqos/federation.hpp"
#include "pqos/metrics.hpp"
#include "pqos/model_params.hpp"
#include "pqos/orchestrator.hpp"
#include "pqos/perception.hpp"
#include "pqos/radio.hpp"
#include "pqos/rl.hpp"
#include "pqos/rng.hpp"
#include "pqos/simcore.hpp"
