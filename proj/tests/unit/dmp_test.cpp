// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "support.hpp"
#include "vsandbox/dmp.hpp"
#include "vsandbox/error.hpp"

using namespace vsandbox;
using namespace vsandbox::dmp;
namespace vt = vsandbox::testing;

namespace {

constexpr std::array kShapes{vt::DemoShape::line, vt::DemoShape::arc, vt::DemoShape::s_curve};

RolloutConfig demo_config(const DmpParams& p, std::size_t steps) {
    RolloutConfig cfg;
    cfg.start = p.demo_start;
    cfg.goal = p.demo_goal;
    cfg.steps = steps;
    cfg.dt = p.demo_duration / static_cast<double>(steps);
    return cfg;
}

std::vector<Vec3> with_start(const RolloutConfig& cfg, const std::vector<Vec3>& positions) {
    std::vector<Vec3> out{cfg.start};
    out.insert(out.end(), positions.begin(), positions.end());
    return out;
}

class ShapeTest : public ::testing::TestWithParam<vt::DemoShape> {};

double distance_to_polyline(const Vec3& q, const std::vector<Vec3>& path) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < path.size(); ++i) {
        const Vec3 seg = path[i] - path[i - 1];
        const double t = std::clamp((q - path[i - 1]).dot(seg) / std::max(seg.squaredNorm(), 1e-300), 0.0, 1.0);
        best = std::min(best, (q - (path[i - 1] + t * seg)).norm());
    }
    return best;
}

}  // namespace

TEST(DmpBasis, DefaultsAndLayout) {
    const auto p = fit(Demonstration::from_waypoints(vt::synthetic_demo(vt::DemoShape::line)));
    EXPECT_EQ(p.basis_count, 32u);
    EXPECT_EQ(p.alpha_y, 25.0);
    EXPECT_EQ(p.gamma_y, 25.0 / 4.0);
    EXPECT_DOUBLE_EQ(p.alpha_x, std::log(100.0));
    ASSERT_EQ(p.centers.size(), 32u);
    EXPECT_DOUBLE_EQ(p.centers.front(), 1.0);
    EXPECT_NEAR(p.centers.back(), 0.01, 1e-12);
    for (std::size_t j = 1; j < p.centers.size(); ++j) EXPECT_LT(p.centers[j], p.centers[j - 1]);
    for (double h : p.widths) EXPECT_GT(h, 0.0);
}

TEST(Demonstration, ResamplesToFixedLength) {
    const auto demo = Demonstration::from_waypoints(vt::synthetic_demo(vt::DemoShape::arc, 137, 3.0));
    ASSERT_EQ(demo.resampled.size(), 50u);
    EXPECT_DOUBLE_EQ(demo.resampled.front().t, 0.0);
    EXPECT_DOUBLE_EQ(demo.resampled.back().t, 3.0);
    EXPECT_EQ(demo.resampled.back().pose.position, demo.raw.back().pose.position);
    EXPECT_DOUBLE_EQ(demo.duration(), 3.0);
}

TEST(Demonstration, Validation) {
    auto code = [](std::vector<Waypoint> raw) {
        try {
            Demonstration::from_waypoints(std::move(raw));
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::InvalidArgument;
    };
    EXPECT_EQ(code({{0.0, Pose::at(0, 0, 0)}}), ErrorCode::InvalidDemonstration);
    EXPECT_EQ(code({{0.0, Pose::at(0, 0, 0)}, {0.0, Pose::at(1, 0, 0)}}), ErrorCode::InvalidDemonstration);
    Pose skew = Pose::at(1, 0, 0);
    skew.orientation = Quat(0.5, 0, 0, 0);
    EXPECT_EQ(code({{0.0, Pose::at(0, 0, 0)}, {1.0, skew}}), ErrorCode::InvalidDemonstration);
    EXPECT_EQ(code({{0.0, Pose::at(0, 0, 0)}, {1.0, Pose::at(NAN, 0, 0)}}), ErrorCode::InvalidDemonstration);
}

TEST(Kinematics, ExactOnQuadratics) {
    // Second-order stencils (including the one-sided ends) are exact for y = a t^2 + b t.
    std::vector<Waypoint> raw;
    for (int i = 0; i < 50; ++i) {
        const double t = 2.0 * i / 49.0;
        raw.push_back({t, Pose::at(0.3 * t * t + 0.1 * t, -0.2 * t * t, 0.05 * t)});
    }
    const auto k = kinematics(Demonstration::from_waypoints(raw));
    for (std::size_t i = 0; i < k.t.size(); ++i) {
        const double t = k.t[i];
        EXPECT_NEAR(k.yd[0][i], 0.6 * t + 0.1, 1e-9);
        EXPECT_NEAR(k.ydd[0][i], 0.6, 1e-8);
        EXPECT_NEAR(k.yd[1][i], -0.4 * t, 1e-9);
        EXPECT_NEAR(k.ydd[2][i], 0.0, 1e-8);
    }
}

TEST_P(ShapeTest, ReproducesDemoWithinTwoPercent) {
    const auto demo = Demonstration::from_waypoints(vt::synthetic_demo(GetParam()));
    const auto p = fit(demo);
    const auto cfg = demo_config(p, demo.resampled.size() - 1);
    std::vector<Vec3> path;
    for (const auto& w : demo.resampled) path.push_back(w.pose.position);
    const std::vector<Vec3> reference(path.begin() + 1, path.end());
    EXPECT_LT(vt::rmse(rollout(p, cfg).positions(), reference), 0.02 * path_length(path));
}

TEST_P(ShapeTest, MatchesFineStepIntegration) {
    const auto p = fit(Demonstration::from_waypoints(vt::synthetic_demo(GetParam())));
    const auto cfg = demo_config(p, 60);
    const auto ours = rollout(p, cfg).positions();
    const auto oracle = vt::fine_step_rollout(p, cfg);
    EXPECT_LT(vt::max_deviation(ours, oracle), 0.01 * path_length(with_start(cfg, oracle)));
}

TEST_P(ShapeTest, WeightsMatchDenseLeastSquares) {
    const auto demo = Demonstration::from_waypoints(vt::synthetic_demo(GetParam()));
    const auto p = fit(demo);
    const auto oracle = vt::dense_lwr_weights(demo, p);
    for (int d = 0; d < 3; ++d) {
        for (std::size_t j = 0; j < p.basis_count; ++j) {
            EXPECT_NEAR(p.weights[d][j], oracle[d][j], 1e-8 * std::max(1.0, std::abs(oracle[d][j]))) << d << "," << j;
        }
    }
}

TEST_P(ShapeTest, NewGoalReached) {
    const auto p = fit(Demonstration::from_waypoints(vt::synthetic_demo(GetParam())));
    auto cfg = demo_config(p, 100);
    cfg.goal = p.demo_goal + Vec3(0.1, 0.0, 0.0);
    const auto end = rollout(p, cfg).poses.back().position;
    EXPECT_LT((end - cfg.goal).norm(), 1e-3);
    EXPECT_LT((end - vt::fine_step_rollout(p, cfg).back()).norm(), 1e-3);
}

TEST_P(ShapeTest, FramesLieOnTheSamePath) {
    const auto p = fit(Demonstration::from_waypoints(vt::synthetic_demo(GetParam())));
    const auto base = demo_config(p, 30);
    const auto dense = with_start(base, vt::fine_step_rollout(p, retime_frames(base, 2000)));
    const double length = path_length(dense);
    for (std::size_t n : {8u, 30u, 120u}) {
        const auto cfg = retime_frames(base, n);
        for (const auto& pose : rollout(p, cfg).poses) {
            EXPECT_LT(distance_to_polyline(pose.position, dense), 1e-3 * length) << "N=" << n;
        }
    }
}

INSTANTIATE_TEST_SUITE_P(Synthetic, ShapeTest, ::testing::ValuesIn(kShapes),
                         [](const auto& info) { return vt::shape_name(info.param); });

// Eight chords cannot follow the S bend to 1%; that shape is covered by FramesLieOnTheSamePath.
TEST(Rollout, ResampledPathIndependentOfFrameCount) {
    for (const auto shape : {vt::DemoShape::line, vt::DemoShape::arc}) {
        const auto p = fit(Demonstration::from_waypoints(vt::synthetic_demo(shape)));
        const auto base = demo_config(p, 30);
        const auto ref_path = with_start(base, rollout(p, base).positions());
        const auto ref = resample_by_arc_length(ref_path, 100);
        const double length = path_length(ref_path);
        for (std::size_t n : {8u, 120u}) {
            const auto cfg = retime_frames(base, n);
            const auto other = resample_by_arc_length(with_start(cfg, rollout(p, cfg).positions()), 100);
            EXPECT_LT(vt::max_deviation(ref, other), 0.01 * length) << vt::shape_name(shape) << " N=" << n;
        }
    }
}

TEST(Rollout, ZeroForcingIsMonotoneAndConverges) {
    RolloutConfig cfg;
    cfg.start = Vec3::Zero();
    cfg.goal = Vec3(1.0, 1.0, 1.0);
    cfg.steps = 200;
    cfg.dt = 0.01;
    const auto traj = rollout(DmpParams::zero(), cfg);
    ASSERT_EQ(traj.poses.size(), 200u);
    double prev = 0.0;
    for (const auto& pose : traj.poses) {
        EXPECT_GE(pose.position.x(), prev);
        EXPECT_LE(pose.position.x(), 1.0 + 1e-12);
        prev = pose.position.x();
    }
    EXPECT_LT(std::abs(traj.poses.back().position.x() - 1.0), 1e-3);
}

TEST(Rollout, FittedGoalConvergenceOverRandomGoals) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> ux(0.1, 0.9), uy(-0.6, 0.6), uz(0.05, 0.6);
    for (auto shape : kShapes) {
        const auto p = fit(Demonstration::from_waypoints(vt::synthetic_demo(shape)));
        for (int i = 0; i < 30; ++i) {
            auto cfg = demo_config(p, 100 + i * 10);
            cfg.goal = Vec3(ux(rng), uy(rng), uz(rng));
            EXPECT_LT((rollout(p, cfg).poses.back().position - cfg.goal).norm(), 1e-3) << vt::shape_name(shape);
        }
    }
}

TEST(Rollout, IntegratorConverges) {
    const auto p = fit(Demonstration::from_waypoints(vt::synthetic_demo(vt::DemoShape::arc)));
    auto cfg = demo_config(p, 20);
    const auto oracle = vt::fine_step_rollout(p, cfg);
    double prev = INFINITY;
    for (std::size_t sub : {5u, 10u, 20u, 40u}) {
        cfg.substeps = sub;
        const double err = vt::max_deviation(rollout(p, cfg).positions(), oracle);
        EXPECT_LT(err, 0.75 * prev) << "substeps " << sub;  // first order: halves with the step
        prev = err;
    }
}

TEST(Rollout, OrientationSlerpsBetweenEndpoints) {
    auto p = DmpParams::zero();
    p.start_orientation = Quat::Identity();
    p.end_orientation = Quat(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitZ()));
    RolloutConfig cfg;
    cfg.goal = Vec3(0.1, 0, 0);
    cfg.steps = 50;
    cfg.dt = 0.02;
    const auto traj = rollout(p, cfg);
    EXPECT_LT(traj.poses.back().orientation.angularDistance(p.end_orientation), 1e-9);
    double prev = 0.0;
    for (const auto& pose : traj.poses) {
        const double a = pose.orientation.angularDistance(p.start_orientation);
        EXPECT_GE(a, prev - 1e-12);
        prev = a;
    }
}

TEST(Rollout, Errors) {
    RolloutConfig cfg;
    cfg.steps = 1;
    EXPECT_THROW(rollout(DmpParams::zero(), cfg), Error);
    cfg.steps = 10;
    cfg.dt = 0.0;
    EXPECT_THROW(rollout(DmpParams::zero(), cfg), Error);
    auto wild = DmpParams::zero();
    for (auto& w : wild.weights) w.assign(wild.basis_count, std::numeric_limits<double>::max());
    cfg.dt = 0.1;
    cfg.goal = Vec3(1, 1, 1);
    try {
        rollout(wild, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFiniteState);
    }
}

TEST(Fit, FlatAxisGetsZeroWeights) {
    std::vector<Waypoint> raw;
    for (int i = 0; i < 100; ++i) {
        const double s = i / 99.0;
        raw.push_back({s * 2.0, Pose::at(0.3 + 0.2 * s, 0.1 + 0.05 * std::sin(M_PI * s), 0.2 + 0.1 * s)});
    }
    const auto p = fit(Demonstration::from_waypoints(raw));
    for (double w : p.weights[1]) EXPECT_EQ(w, 0.0);
    EXPECT_NE(p.weights[0][10], 0.0);
}

TEST(Fit, DegenerateDemoIsPinned) {
    const auto demo = Demonstration::from_waypoints({{0.0, Pose::at(0.4, 0.1, 0.2)}, {1.0, Pose::at(0.4, 0.1, 0.2)}});
    EXPECT_TRUE(demo.degenerate());
    const auto p = fit(demo);
    for (const auto& axis : p.weights) {
        for (double w : axis) EXPECT_EQ(w, 0.0);
    }
    const auto traj = rollout(p, demo_config(p, 10));
    for (const auto& pose : traj.poses) EXPECT_LT((pose.position - Vec3(0.4, 0.1, 0.2)).norm(), 1e-12);
}

TEST(Retime, Examples) {
    RolloutConfig cfg;
    cfg.steps = 30;
    cfg.dt = 8.0 / 30.0;
    EXPECT_DOUBLE_EQ(cfg.duration(), 8.0);
    EXPECT_EQ(retime_frames(cfg, 30), cfg);
    const auto quick = retime_frames(cfg, 8);
    EXPECT_EQ(quick.steps, 8u);
    EXPECT_NEAR(quick.duration() / cfg.duration(), 8.0 / 30.0, 1e-12);
    const auto fixed = retime(cfg, 8, 4.0 / 3.0);
    EXPECT_NEAR(fixed.duration(), 4.0 / 3.0, 1e-12);
    const auto back = retime(fixed, 30, 8.0);
    EXPECT_NEAR(back.dt, cfg.dt, 1e-12);
    EXPECT_EQ(back.steps, cfg.steps);
    EXPECT_THROW(retime_frames(cfg, 1), Error);
    EXPECT_THROW(retime_duration(cfg, 0.0), Error);
}

TEST(Retime, RoundTripProperty) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 200; ++i) {
        RolloutConfig cfg;
        cfg.steps = 2 + rng() % 300;
        cfg.dt = std::uniform_real_distribution<double>(1e-3, 1.0)(rng);
        const std::size_t n = 2 + rng() % 300;
        const double d = std::uniform_real_distribution<double>(0.1, 20.0)(rng);
        const auto there = retime(cfg, n, d);
        EXPECT_NEAR(there.duration(), d, 1e-12 * d);
        const auto back = retime(there, cfg.steps, cfg.duration());
        EXPECT_NEAR(back.dt, cfg.dt, 1e-12);
        EXPECT_EQ(back.steps, cfg.steps);
    }
}

TEST(ArcLength, ResampleEquallySpaced) {
    const std::vector<Vec3> path{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 2, 0)};
    const auto out = resample_by_arc_length(path, 4);
    ASSERT_EQ(out.size(), 4u);
    EXPECT_TRUE(out[1].isApprox(Vec3(1, 0, 0)));
    EXPECT_TRUE(out[2].isApprox(Vec3(1, 1, 0)));
    EXPECT_DOUBLE_EQ(path_length(path), 3.0);
}

TEST(DmpIo, JsonlRoundTrip) {
    const auto demo = vt::synthetic_demo(vt::DemoShape::arc, 20);
    std::stringstream buf;
    write_waypoints_jsonl(buf, demo);
    const auto back = read_waypoints_jsonl(buf);
    ASSERT_EQ(back.size(), demo.size());
    for (std::size_t i = 0; i < demo.size(); ++i) {
        EXPECT_DOUBLE_EQ(back[i].t, demo[i].t);
        EXPECT_EQ(back[i].pose, demo[i].pose);
    }
    std::stringstream bad("{\"t\": 0, \"x\": 1}\n");
    EXPECT_THROW(read_waypoints_jsonl(bad), Error);
}

TEST(DmpIo, ParamsAndConfigRoundTrip) {
    const auto p = fit(Demonstration::from_waypoints(vt::synthetic_demo(vt::DemoShape::s_curve)));
    EXPECT_EQ(params_from_json(nlohmann::json::parse(params_to_json(p).dump())), p);
    auto cfg = demo_config(p, 30);
    cfg.end_orientation = Quat(Eigen::AngleAxisd(0.3, Vec3::UnitX()));
    EXPECT_EQ(dmp::config_from_json(nlohmann::json::parse(config_to_json(cfg).dump())), cfg);
}

TEST(DmpIo, TrajectoryWaypointTimes) {
    const auto p = DmpParams::zero();
    RolloutConfig cfg;
    cfg.goal = Vec3(0.1, 0, 0);
    cfg.steps = 5;
    cfg.dt = 0.5;
    const auto w = trajectory_waypoints(rollout(p, cfg));
    ASSERT_EQ(w.size(), 5u);
    EXPECT_DOUBLE_EQ(w.front().t, 0.5);
    EXPECT_DOUBLE_EQ(w.back().t, 2.5);
}
