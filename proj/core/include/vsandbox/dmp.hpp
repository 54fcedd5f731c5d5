// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsandbox/geometry.hpp"

// Discrete dynamic movement primitives, one per Cartesian axis:
//
//   tau * dz = alpha_y * (gamma_y * (g - y) - z) + f(x)     tau * dy = z
//   tau * dx = -alpha_x * x                                 x(0) = 1
//   f(x)     = (sum_j psi_j(x) w_j / sum_j psi_j(x)) * x * (g - y0)
//   psi_j(x) = exp(-h_j * (x - c_j)^2)
//
// Weights come from locally-weighted regression against the forcing term
// needed to reproduce a single demonstration. Orientation is not part of the
// dynamics: it is slerped between the endpoint orientations along the phase.

namespace vsandbox::dmp {

struct Waypoint {
    double t = 0.0;  // seconds
    Pose pose;
    bool operator==(const Waypoint&) const = default;
};

struct Demonstration {
    std::vector<Waypoint> raw;
    std::vector<Waypoint> resampled;  // uniform in time, length W

    /// Validates (>= 2 waypoints, strictly increasing timestamps, unit
    /// quaternions) and resamples to `resampled_count` points.
    static Demonstration from_waypoints(std::vector<Waypoint> raw, std::size_t resampled_count = 50);

    double duration() const;
    /// True when all raw positions coincide.
    bool degenerate(double tol = 1e-9) const;
};

struct DmpParams {
    std::size_t basis_count = 32;
    double alpha_y = 25.0;
    double gamma_y = 25.0 / 4.0;
    double alpha_x = 0.0;  // set to ln(100) by make_basis: x(tau) = 0.01
    std::vector<double> centers;
    std::vector<double> widths;
    std::array<std::vector<double>, 3> weights;
    Vec3 demo_start = Vec3::Zero();
    Vec3 demo_goal = Vec3::Zero();
    Quat start_orientation = Quat::Identity();
    Quat end_orientation = Quat::Identity();
    double demo_duration = 1.0;

    /// Zero weights with the default basis layout.
    static DmpParams zero(std::size_t basis_count = 32);

    double forcing(std::size_t axis, double phase) const;
    bool operator==(const DmpParams&) const = default;
};

struct FitOptions {
    std::size_t basis_count = 32;
    double alpha_y = 25.0;
    double gamma_y = 25.0 / 4.0;
    /// Below this displacement an axis gets zero weights.
    double min_displacement = 1e-6;
};

/// Centers c_j = exp(-alpha_x * j / (J - 1)), widths h_j = 4 J^1.5 / c_j.
void make_basis(DmpParams& params);

/// Per-axis kinematics of the resampled demo (central differences inside,
/// second-order one-sided stencils at the ends).
struct DemoKinematics {
    std::vector<double> t;
    std::array<std::vector<double>, 3> y, yd, ydd;
};
DemoKinematics kinematics(const Demonstration& demo);

DmpParams fit(const Demonstration& demo, const FitOptions& options = {});

struct RolloutConfig {
    Vec3 start = Vec3::Zero();
    Vec3 goal = Vec3::Zero();
    std::optional<Quat> start_orientation;  // defaults to the params' endpoints
    std::optional<Quat> end_orientation;
    std::size_t steps = 100;  // N output frames
    double dt = 0.01;         // seconds per frame
    /// Integration substeps per frame; 0 picks enough for ~1000 steps per rollout.
    std::size_t substeps = 0;

    double duration() const { return static_cast<double>(steps) * dt; }
    bool operator==(const RolloutConfig&) const = default;
};

/// `steps` poses at t = dt, 2 dt, ..., N dt (the start pose is not repeated).
struct Trajectory {
    std::vector<Pose> poses;
    double dt = 0.0;

    std::vector<Vec3> positions() const;
    bool operator==(const Trajectory&) const = default;
};

/// Integrates the system with tau = N * dt (semi-implicit Euler). Throws
/// NonFiniteState if the state blows up, InvalidArgument on N < 2 or dt <= 0.
Trajectory rollout(const DmpParams& params, const RolloutConfig& config);

/// Same seconds per frame, new frame count.
RolloutConfig retime_frames(const RolloutConfig& config, std::size_t new_steps);
/// Same frame count, new total duration.
RolloutConfig retime_duration(const RolloutConfig& config, double new_duration);
/// New frame count and total duration.
RolloutConfig retime(const RolloutConfig& config, std::size_t new_steps, double new_duration);

double path_length(const std::vector<Vec3>& path);
/// `count` points equally spaced along the polyline.
std::vector<Vec3> resample_by_arc_length(const std::vector<Vec3>& path, std::size_t count);

// JSONL: one pose per line, {"t", "x", "y", "z", "qw", "qx", "qy", "qz"}.
std::vector<Waypoint> read_waypoints_jsonl(std::istream& in);
void write_waypoints_jsonl(std::ostream& out, const std::vector<Waypoint>& waypoints);
std::vector<Waypoint> trajectory_waypoints(const Trajectory& trajectory);

nlohmann::json params_to_json(const DmpParams& params);
DmpParams params_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RolloutConfig& config);
RolloutConfig config_from_json(const nlohmann::json& j);

}  // namespace vsandbox::dmp
