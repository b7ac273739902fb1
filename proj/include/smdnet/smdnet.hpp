#pragma once

// Umbrella header.

#include "smdnet/belief_propagation.hpp"
#include "smdnet/config.hpp"
#include "smdnet/errors.hpp"
#include "smdnet/estimators.hpp"
#include "smdnet/gaussian.hpp"
#include "smdnet/gaussian_inference.hpp"
#include "smdnet/grid.hpp"
#include "smdnet/harness.hpp"
#include "smdnet/network.hpp"
#include "smdnet/rng.hpp"
#include "smdnet/runner.hpp"
#include "smdnet/scenarios.hpp"
#include "smdnet/schedule.hpp"
#include "smdnet/variables.hpp"
#include "smdnet/verify.hpp"
