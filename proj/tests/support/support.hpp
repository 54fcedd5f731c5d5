// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vsandbox/api.hpp"
#include "vsandbox/dmp.hpp"
#include "vsandbox/plan_ast.hpp"
#include "vsandbox/resolver.hpp"
#include "vsandbox/scenario.hpp"

// Fixtures and independent oracles shared by the unit tests and the
// acceptance runner.

namespace vsandbox::testing {

std::filesystem::path scenario_dir();
Scenario bundled_scenario(const std::string& name);
std::vector<std::string> bundled_scenario_names();

// ---- synthetic demonstrations ---------------------------------------------

enum class DemoShape { line, arc, s_curve };
std::string shape_name(DemoShape shape);

/// Minimum-jerk timed path sampled at `count` points over `duration` seconds.
std::vector<dmp::Waypoint> synthetic_demo(DemoShape shape, std::size_t count = 200, double duration = 2.0);

// ---- DMP oracles ----------------------------------------------------------

/// Per-basis weighted least squares solved densely (QR on the weighted
/// design column) from a forcing target built with matrix difference
/// operators. Returns weights[axis][basis].
std::array<std::vector<double>, 3> dense_lwr_weights(const dmp::Demonstration& demo, const dmp::DmpParams& basis);

/// RK4 integration of the fitted system with a fine fixed step; positions at
/// the requested frame times t = dt, 2 dt, ..., N dt.
std::vector<Vec3> fine_step_rollout(const dmp::DmpParams& params, const dmp::RolloutConfig& config, double h = 1e-4);

double rmse(const std::vector<Vec3>& a, const std::vector<Vec3>& b);
double max_deviation(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

// ---- random APIs and the step-interpreter oracle ----------------------------

struct RandomApiCase {
    ApiSpec api;
    PlanAst plan;
};

struct RandomApiOptions {
    int max_depth = 4;     // composed nesting below a plan call
    int max_fanout = 5;    // steps per composed body
    int functions = 12;    // taught functions per API
    int plan_length = 4;
};

/// Acyclic API built by applying AddFunction deltas to the gift-bag seed, plus
/// a checked plan over it.
RandomApiCase random_api_case(std::mt19937_64& rng, const RandomApiOptions& options = {});

/// Executes the plan with an explicit frame stack, one body step at a time,
/// emitting a primitive call whenever a primitive body is reached.
ResolvedProgram interpret_plan(const PlanAst& plan, const ApiSpec& api);

}  // namespace vsandbox::testing
