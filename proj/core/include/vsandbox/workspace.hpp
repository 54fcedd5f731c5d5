// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsandbox/dmp.hpp"
#include "vsandbox/geometry.hpp"
#include "vsandbox/resolver.hpp"

// Simulated tabletop: a kinematic point effector above a 1.0 x 1.5 m table,
// objects with poses, and a fixed overhead pinhole camera for keypoints.

namespace vsandbox {

struct PixelPoint {
    double u = 0.0;
    double v = 0.0;
    bool operator==(const PixelPoint&) const = default;
};

/// Overhead camera looking straight down. Image v grows with world x,
/// image u with world y.
struct Camera {
    double focal_px = 600.0;
    double cx = 320.0;
    double cy = 240.0;
    Vec3 center = Vec3(0.5, 0.0, 1.2);
    int width = 640;
    int height = 480;

    PixelPoint project(const Vec3& p) const;
    /// Point on the horizontal plane at height z seen at pixel px.
    Vec3 unproject(const PixelPoint& px, double z) const;
    bool in_image(const PixelPoint& px) const;
    bool operator==(const Camera&) const = default;
};

struct SceneObject {
    std::string id;
    std::string description;
    Pose pose;
    double rest_z = 0.0;  // resting height on the table
    PixelPoint keypoint_px;
    bool grasped = false;
    bool operator==(const SceneObject&) const = default;
};

struct Scene {
    std::vector<SceneObject> objects;
    Bounds bounds;
    Camera camera;

    const SceneObject* find(const std::string& id) const;
    SceneObject* find(const std::string& id);
    /// Object whose keypoint is nearest to px, if within radius_px.
    const SceneObject* object_at_keypoint(const PixelPoint& px, double radius_px = 20.0) const;
    bool operator==(const Scene&) const = default;
};

/// Objects carry "pose" or "keypoint" + "z" (the pose is then unprojected);
/// keypoints are always recomputed from poses.
Scene scene_from_json(const nlohmann::json& j);
nlohmann::json scene_to_json(const Scene& scene);
nlohmann::json object_to_json(const SceneObject& object);

enum class Gripper { open, closed };

struct EffectorState {
    Pose pose;
    Gripper gripper = Gripper::open;
    std::optional<std::string> held_object;
    bool operator==(const EffectorState&) const = default;
};

nlohmann::json effector_to_json(const EffectorState& effector);

enum class GroundingSource { model, click };
std::string grounding_source_name(GroundingSource source);

struct Grounding {
    std::string object_id;
    GroundingSource source = GroundingSource::model;
    double p_err = 0.0;
    bool operator==(const Grounding&) const = default;
};

struct GroundingTeach {
    std::string name;
    std::string object_id;
    PixelPoint keypoint_px;
    std::int64_t t_ms = 0;
    bool operator==(const GroundingTeach&) const = default;
};

/// Name -> scene object id. A name never moves to another object; binding
/// it again to the same object only updates source and error rate.
class GroundingRegistry {
public:
    /// Throws GroundingConflict if `name` is bound to a different object.
    void bind(const std::string& name, Grounding grounding);
    void record_click(GroundingTeach teach);

    const Grounding* lookup(const std::string& name) const;
    const std::map<std::string, Grounding>& entries() const { return entries_; }
    const std::vector<GroundingTeach>& teach_log() const { return teach_log_; }

    bool operator==(const GroundingRegistry&) const = default;

private:
    std::map<std::string, Grounding> entries_;
    std::vector<GroundingTeach> teach_log_;
};

nlohmann::json registry_to_json(const GroundingRegistry& registry);

enum class FailureReason { OutOfBounds, NothingGrasped, UserInterrupt, UngroundedObject, SimulatedGroundingError };
std::string failure_reason_name(FailureReason reason);

struct SkillOutcome {
    std::optional<FailureReason> failure;  // nullopt = success
    std::string detail;
    dmp::Trajectory trajectory;
    nlohmann::json trace = nlohmann::json::object();
    /// Uniform draw consumed by error injection, for replay checks.
    std::optional<double> draw;

    bool ok() const { return !failure.has_value(); }
};

struct DmpSkill {
    std::string id;
    dmp::DmpParams params;
    /// Demo goal relative to the object named in the teaching utterance.
    Vec3 goal_offset = Vec3::Zero();
    std::string anchor_literal;  // empty: goal offset is zero
    std::int64_t default_frames = 30;
    std::vector<dmp::Waypoint> demo;
    bool operator==(const DmpSkill&) const = default;
};

struct WorkspaceConfig {
    double hover_height = 0.10;   // goto stops this far above the target
    double finger_length = 0.10;  // tip = position - finger_length * z
    double speed = 0.25;          // m/s
    double waypoint_hz = 10.0;
    double grasp_radius = 0.03;
    double dmp_seconds_per_frame = 8.0 / 30.0;
    bool operator==(const WorkspaceConfig&) const = default;
};

nlohmann::json workspace_config_to_json(const WorkspaceConfig& config);
WorkspaceConfig workspace_config_from_json(const nlohmann::json& j);

struct Workspace {
    Scene scene;
    EffectorState effector;
    GroundingRegistry registry;
    std::map<std::string, DmpSkill> skills;
    WorkspaceConfig config;
    std::mt19937_64 rng;

    Vec3 tip() const;
    bool operator==(const Workspace&) const = default;
};

/// Uniform draw in [0, 1) with 53 bits, identical on every platform.
double uniform01(std::mt19937_64& rng);

struct GroundResult {
    std::string object_id;
    bool injected_error = false;
    std::optional<double> draw;
};

/// Looks up the bound object; when `rng` is given and the binding's p_err is
/// positive, a draw below p_err returns the nearest other object instead.
/// Throws UngroundedObject.
GroundResult ground_object(const std::string& name, const GroundingRegistry& registry, const Scene& scene,
                           std::mt19937_64* rng);

/// Runs one primitive (or DMP) call against the workspace. Motions that
/// would leave the bounds fail before moving.
SkillOutcome execute_primitive(const PrimitiveCall& call, Workspace& ws, bool inject_errors = true);

SkillOutcome execute_dmp_skill(const std::string& skill_id, const ResolvedArg& target, std::int64_t frames,
                               Workspace& ws, bool inject_errors = true);

/// Goal and rollout config a DMP call would use from the current state.
dmp::RolloutConfig dmp_rollout_config(const DmpSkill& skill, const Vec3& target, std::int64_t frames,
                                      const Workspace& ws);

/// Simulates the whole program on a copy with error injection off. Stops
/// after the first failing call; its partial trajectory is included.
std::vector<dmp::Trajectory> preview_trajectory(const ResolvedProgram& program, const Workspace& ws);

nlohmann::json trajectory_to_json(const dmp::Trajectory& trajectory);

}  // namespace vsandbox
