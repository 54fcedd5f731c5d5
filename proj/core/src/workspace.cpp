// SPDX-License-Identifier: Apache-2.0
#include "vsandbox/workspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "vsandbox/error.hpp"

namespace vsandbox {

PixelPoint Camera::project(const Vec3& p) const {
    const double depth = center.z() - p.z();
    if (!(depth > 0.0)) throw Error(ErrorCode::InvalidArgument, "point is not below the camera");
    return {cx + focal_px * (p.y() - center.y()) / depth, cy + focal_px * (p.x() - center.x()) / depth};
}

Vec3 Camera::unproject(const PixelPoint& px, double z) const {
    const double depth = center.z() - z;
    return {center.x() + (px.v - cy) * depth / focal_px, center.y() + (px.u - cx) * depth / focal_px, z};
}

bool Camera::in_image(const PixelPoint& px) const {
    return px.u >= 0.0 && px.v >= 0.0 && px.u < width && px.v < height;
}

const SceneObject* Scene::find(const std::string& id) const {
    for (const auto& o : objects) {
        if (o.id == id) return &o;
    }
    return nullptr;
}

SceneObject* Scene::find(const std::string& id) {
    for (auto& o : objects) {
        if (o.id == id) return &o;
    }
    return nullptr;
}

const SceneObject* Scene::object_at_keypoint(const PixelPoint& px, double radius_px) const {
    const SceneObject* best = nullptr;
    double best_d = radius_px;
    for (const auto& o : objects) {
        const double d = std::hypot(o.keypoint_px.u - px.u, o.keypoint_px.v - px.v);
        if (d <= best_d) {
            best_d = d;
            best = &o;
        }
    }
    return best;
}

namespace {

PixelPoint pixel_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::MalformedDocument, "keypoint must be [u, v]");
    return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

Scene scene_from_json(const nlohmann::json& j) {
    try {
        Scene scene;
        if (j.contains("bounds")) {
            scene.bounds.min = vec3_from_json(j["bounds"].at("min"));
            scene.bounds.max = vec3_from_json(j["bounds"].at("max"));
        }
        if (j.contains("camera")) {
            const auto& c = j["camera"];
            scene.camera.focal_px = c.value("focal_px", scene.camera.focal_px);
            scene.camera.cx = c.value("cx", scene.camera.cx);
            scene.camera.cy = c.value("cy", scene.camera.cy);
            if (c.contains("center")) scene.camera.center = vec3_from_json(c["center"]);
            scene.camera.width = c.value("width", scene.camera.width);
            scene.camera.height = c.value("height", scene.camera.height);
        }
        for (const auto& o : j.at("objects")) {
            SceneObject obj;
            obj.id = o.at("id").get<std::string>();
            obj.description = o.value("description", "");
            if (o.contains("pose")) {
                obj.pose = pose_from_json(o["pose"]);
            } else {
                obj.pose.position = scene.camera.unproject(pixel_from_json(o.at("keypoint")), o.at("z").get<double>());
            }
            obj.rest_z = o.value("rest_z", obj.pose.position.z());
            obj.keypoint_px = scene.camera.project(obj.pose.position);
            if (!scene.bounds.contains(obj.pose.position)) {
                throw Error(ErrorCode::MalformedDocument, fmt::format("object {} lies outside the workspace", obj.id));
            }
            if (scene.find(obj.id)) throw Error(ErrorCode::MalformedDocument, "duplicate object id " + obj.id);
            scene.objects.push_back(std::move(obj));
        }
        return scene;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedDocument, std::string("bad scene: ") + e.what());
    }
}

nlohmann::json object_to_json(const SceneObject& o) {
    return {{"id", o.id},
            {"description", o.description},
            {"pose", pose_to_json(o.pose)},
            {"rest_z", o.rest_z},
            {"keypoint", {o.keypoint_px.u, o.keypoint_px.v}},
            {"grasped", o.grasped}};
}

nlohmann::json scene_to_json(const Scene& scene) {
    nlohmann::json objects = nlohmann::json::array();
    for (const auto& o : scene.objects) objects.push_back(object_to_json(o));
    const auto& c = scene.camera;
    return {{"objects", objects},
            {"bounds", {{"min", vec3_to_json(scene.bounds.min)}, {"max", vec3_to_json(scene.bounds.max)}}},
            {"camera",
             {{"focal_px", c.focal_px},
              {"cx", c.cx},
              {"cy", c.cy},
              {"center", vec3_to_json(c.center)},
              {"width", c.width},
              {"height", c.height}}}};
}

nlohmann::json effector_to_json(const EffectorState& e) {
    return {{"pose", pose_to_json(e.pose)},
            {"gripper", e.gripper == Gripper::open ? "open" : "closed"},
            {"held_object", e.held_object ? nlohmann::json(*e.held_object) : nlohmann::json(nullptr)}};
}

std::string grounding_source_name(GroundingSource source) {
    return source == GroundingSource::model ? "model" : "click";
}

void GroundingRegistry::bind(const std::string& name, Grounding grounding) {
    auto it = entries_.find(name);
    if (it != entries_.end() && it->second.object_id != grounding.object_id) {
        throw Error(ErrorCode::GroundingConflict,
                    fmt::format("{} already refers to {}, not {}", name, it->second.object_id, grounding.object_id));
    }
    entries_[name] = std::move(grounding);
}

void GroundingRegistry::record_click(GroundingTeach teach) { teach_log_.push_back(std::move(teach)); }

const Grounding* GroundingRegistry::lookup(const std::string& name) const {
    auto it = entries_.find(name);
    return it == entries_.end() ? nullptr : &it->second;
}

nlohmann::json registry_to_json(const GroundingRegistry& registry) {
    nlohmann::json entries = nlohmann::json::object();
    for (const auto& [name, g] : registry.entries()) {
        entries[name] = {{"object_id", g.object_id}, {"source", grounding_source_name(g.source)}, {"p_err", g.p_err}};
    }
    nlohmann::json log = nlohmann::json::array();
    for (const auto& t : registry.teach_log()) {
        log.push_back(
            {{"name", t.name}, {"object_id", t.object_id}, {"keypoint", {t.keypoint_px.u, t.keypoint_px.v}}, {"t_ms", t.t_ms}});
    }
    return {{"entries", entries}, {"teach_log", log}};
}

std::string failure_reason_name(FailureReason reason) {
    switch (reason) {
        case FailureReason::OutOfBounds: return "OutOfBounds";
        case FailureReason::NothingGrasped: return "NothingGrasped";
        case FailureReason::UserInterrupt: return "UserInterrupt";
        case FailureReason::UngroundedObject: return "UngroundedObject";
        case FailureReason::SimulatedGroundingError: return "SimulatedGroundingError";
    }
    return "unknown";
}

nlohmann::json workspace_config_to_json(const WorkspaceConfig& c) {
    return {{"hover_height", c.hover_height},   {"finger_length", c.finger_length},
            {"speed", c.speed},                 {"waypoint_hz", c.waypoint_hz},
            {"grasp_radius", c.grasp_radius},   {"dmp_seconds_per_frame", c.dmp_seconds_per_frame}};
}

WorkspaceConfig workspace_config_from_json(const nlohmann::json& j) {
    WorkspaceConfig c;
    c.hover_height = j.value("hover_height", c.hover_height);
    c.finger_length = j.value("finger_length", c.finger_length);
    c.speed = j.value("speed", c.speed);
    c.waypoint_hz = j.value("waypoint_hz", c.waypoint_hz);
    c.grasp_radius = j.value("grasp_radius", c.grasp_radius);
    c.dmp_seconds_per_frame = j.value("dmp_seconds_per_frame", c.dmp_seconds_per_frame);
    if (!(c.speed > 0.0) || !(c.waypoint_hz > 0.0) || !(c.dmp_seconds_per_frame > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "workspace speed, rate, and frame time must be positive");
    }
    return c;
}

Vec3 Workspace::tip() const { return effector.pose.position - Vec3(0.0, 0.0, config.finger_length); }

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

GroundResult ground_object(const std::string& name, const GroundingRegistry& registry, const Scene& scene,
                           std::mt19937_64* rng) {
    const Grounding* g = registry.lookup(name);
    if (!g) throw Error(ErrorCode::UngroundedObject, fmt::format("{} is not grounded in the scene", name));
    const SceneObject* obj = scene.find(g->object_id);
    if (!obj) throw Error(ErrorCode::UngroundedObject, fmt::format("{} refers to missing object {}", name, g->object_id));
    GroundResult out{obj->id, false, std::nullopt};
    if (rng && g->p_err > 0.0) {
        const double u = uniform01(*rng);
        out.draw = u;
        if (u < g->p_err) {
            const SceneObject* wrong = nullptr;
            double best = std::numeric_limits<double>::infinity();
            for (const auto& o : scene.objects) {
                if (o.id == obj->id || o.grasped) continue;
                const double d = (o.pose.position - obj->pose.position).norm();
                if (d < best) {
                    best = d;
                    wrong = &o;
                }
            }
            if (wrong) {
                out.object_id = wrong->id;
                out.injected_error = true;
            }
        }
    }
    return out;
}

namespace {

void carry_held(Workspace& ws) {
    if (!ws.effector.held_object) return;
    if (SceneObject* o = ws.scene.find(*ws.effector.held_object)) {
        o->pose.position = ws.tip();
        o->keypoint_px = ws.scene.camera.project(o->pose.position);
    }
}

// Straight line at constant speed, one waypoint per 1/hz seconds, ending
// exactly at the goal.
dmp::Trajectory straight_line(const Pose& from, const Pose& to, const WorkspaceConfig& c) {
    dmp::Trajectory traj;
    traj.dt = 1.0 / c.waypoint_hz;
    const double step = c.speed / c.waypoint_hz;
    const double dist = (to.position - from.position).norm();
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(dist / step - 1e-9)));
    traj.poses.reserve(n);
    for (std::size_t k = 1; k <= n; ++k) {
        const double s = static_cast<double>(k) / static_cast<double>(n);
        traj.poses.push_back(
            Pose{k == n ? to.position : from.position + (to.position - from.position) * s,
                 slerp(from.orientation, to.orientation, s)});
    }
    return traj;
}

std::optional<std::size_t> first_outside(const dmp::Trajectory& traj, const Bounds& bounds) {
    for (std::size_t i = 0; i < traj.poses.size(); ++i) {
        if (!bounds.contains(traj.poses[i].position)) return i;
    }
    return std::nullopt;
}

void follow(const dmp::Trajectory& traj, Workspace& ws) {
    for (const auto& p : traj.poses) {
        ws.effector.pose = p;
        carry_held(ws);
    }
}

SkillOutcome fail(FailureReason reason, std::string detail) {
    SkillOutcome out;
    out.failure = reason;
    out.detail = std::move(detail);
    return out;
}

struct TargetPoint {
    Vec3 position;
    std::optional<Quat> orientation;
    nlohmann::json trace;
    bool wrong_object = false;
    std::optional<double> draw;
};

// Resolves a goto/DMP target to a point. Object targets are grounded here,
// at execution time.
TargetPoint locate(const ResolvedArg& arg, Workspace& ws, bool inject_errors) {
    if (const auto* pose = std::get_if<Pose>(&arg)) {
        return {pose->position, pose->orientation, {{"pose", pose_to_json(*pose)}}, false, std::nullopt};
    }
    if (const auto* obj = std::get_if<ObjectTarget>(&arg)) {
        const GroundResult g = ground_object(obj->canonical_name, ws.registry, ws.scene, inject_errors ? &ws.rng : nullptr);
        const SceneObject* o = ws.scene.find(g.object_id);
        TargetPoint t{o->pose.position, std::nullopt, nlohmann::json::object(), g.injected_error, g.draw};
        t.trace = {{"name", obj->canonical_name},
                   {"object_id", o->id},
                   {"keypoint", {o->keypoint_px.u, o->keypoint_px.v}}};
        return t;
    }
    throw Error(ErrorCode::TypeMismatch, "motion target must be an object or a pose");
}

SkillOutcome move_to(const ResolvedArg& target, Workspace& ws, bool inject_errors) {
    TargetPoint t;
    try {
        t = locate(target, ws, inject_errors);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::UngroundedObject) throw;
        return fail(FailureReason::UngroundedObject, e.what());
    }
    Pose goal{t.position + Vec3(0.0, 0.0, ws.config.hover_height), t.orientation.value_or(ws.effector.pose.orientation)};
    SkillOutcome out;
    out.trace = t.trace;
    out.draw = t.draw;
    out.trajectory = straight_line(ws.effector.pose, goal, ws.config);
    if (auto bad = first_outside(out.trajectory, ws.scene.bounds)) {
        out.failure = FailureReason::OutOfBounds;
        out.detail = fmt::format("waypoint {} leaves the workspace", *bad);
        out.trajectory.poses.clear();
        return out;
    }
    follow(out.trajectory, ws);
    if (t.wrong_object) {
        out.failure = FailureReason::SimulatedGroundingError;
        out.detail = fmt::format("{} was grounded to {}", out.trace.value("name", ""), out.trace.value("object_id", ""));
    }
    return out;
}

SkillOutcome grasp(Workspace& ws) {
    SkillOutcome out;
    out.trajectory.dt = 1.0 / ws.config.waypoint_hz;
    ws.effector.gripper = Gripper::closed;
    if (ws.effector.held_object) {
        out.trace = {{"held_object", *ws.effector.held_object}};
        return out;
    }
    const Vec3 tip = ws.tip();
    SceneObject* best = nullptr;
    double best_d = ws.config.grasp_radius;
    for (auto& o : ws.scene.objects) {
        const double d = (o.pose.position - tip).norm();
        if (d <= best_d) {
            best_d = d;
            best = &o;
        }
    }
    if (!best) return fail(FailureReason::NothingGrasped, "no object within reach of the gripper");
    best->grasped = true;
    ws.effector.held_object = best->id;
    carry_held(ws);
    out.trace = {{"held_object", best->id}};
    return out;
}

SkillOutcome release(Workspace& ws) {
    SkillOutcome out;
    out.trajectory.dt = 1.0 / ws.config.waypoint_hz;
    ws.effector.gripper = Gripper::open;
    if (ws.effector.held_object) {
        if (SceneObject* o = ws.scene.find(*ws.effector.held_object)) {
            o->grasped = false;
            o->pose.position = Vec3(ws.effector.pose.position.x(), ws.effector.pose.position.y(), o->rest_z);
            o->keypoint_px = ws.scene.camera.project(o->pose.position);
            out.trace = {{"released", o->id}};
        }
        ws.effector.held_object.reset();
    }
    return out;
}

Vec3 home_position_of(const PrimitiveCall& call) {
    if (!call.args.empty()) {
        if (const auto* p = std::get_if<Pose>(&call.args[0])) return p->position;
    }
    throw Error(ErrorCode::InvalidArgument, "go_home needs the HOME pose");
}

}  // namespace

dmp::RolloutConfig dmp_rollout_config(const DmpSkill& skill, const Vec3& target, std::int64_t frames,
                                      const Workspace& ws) {
    if (frames < 2) throw Error(ErrorCode::InvalidArgument, "a DMP rollout needs at least 2 frames");
    dmp::RolloutConfig cfg;
    cfg.start = ws.effector.pose.position;
    cfg.goal = target + skill.goal_offset;
    cfg.start_orientation = ws.effector.pose.orientation;
    cfg.end_orientation = skill.params.end_orientation;
    cfg.steps = static_cast<std::size_t>(frames);
    cfg.dt = ws.config.dmp_seconds_per_frame;
    return cfg;
}

SkillOutcome execute_dmp_skill(const std::string& skill_id, const ResolvedArg& target, std::int64_t frames,
                               Workspace& ws, bool inject_errors) {
    auto it = ws.skills.find(skill_id);
    if (it == ws.skills.end()) throw Error(ErrorCode::UnknownFunction, "no fitted skill " + skill_id);
    TargetPoint t;
    try {
        t = locate(target, ws, inject_errors);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::UngroundedObject) throw;
        return fail(FailureReason::UngroundedObject, e.what());
    }
    const dmp::RolloutConfig cfg = dmp_rollout_config(it->second, t.position, frames, ws);
    SkillOutcome out;
    out.draw = t.draw;
    out.trace = t.trace;
    out.trace["skill"] = skill_id;
    out.trace["frames"] = frames;
    out.trace["goal"] = vec3_to_json(cfg.goal);
    out.trajectory = dmp::rollout(it->second.params, cfg);
    if (auto bad = first_outside(out.trajectory, ws.scene.bounds)) {
        out.failure = FailureReason::OutOfBounds;
        out.detail = fmt::format("frame {} of {} leaves the workspace", *bad + 1, skill_id);
        out.trajectory.poses.clear();
        return out;
    }
    follow(out.trajectory, ws);
    if (t.wrong_object) {
        out.failure = FailureReason::SimulatedGroundingError;
        out.detail = fmt::format("{} was grounded to {}", out.trace.value("name", ""), out.trace.value("object_id", ""));
    }
    return out;
}

SkillOutcome execute_primitive(const PrimitiveCall& call, Workspace& ws, bool inject_errors) {
    switch (call.kind) {
        case PrimitiveKind::go_home: {
            Pose home;
            home.position = home_position_of(call);
            home.orientation = std::get<Pose>(call.args[0]).orientation;
            return move_to(home, ws, false);
        }
        case PrimitiveKind::go_to:
            if (call.args.empty()) throw Error(ErrorCode::ArityMismatch, "goto needs a target");
            return move_to(call.args[0], ws, inject_errors);
        case PrimitiveKind::grasp:
            return grasp(ws);
        case PrimitiveKind::release:
            return release(ws);
        case PrimitiveKind::dmp: {
            if (call.args.empty()) throw Error(ErrorCode::ArityMismatch, "DMP skill needs a target");
            std::int64_t frames = 0;
            if (call.args.size() > 1) {
                if (const auto* n = std::get_if<std::int64_t>(&call.args[1])) frames = *n;
            }
            if (frames == 0) {
                auto it = ws.skills.find(call.skill_id);
                if (it != ws.skills.end()) frames = it->second.default_frames;
            }
            return execute_dmp_skill(call.skill_id, call.args[0], frames, ws, inject_errors);
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown primitive");
}

std::vector<dmp::Trajectory> preview_trajectory(const ResolvedProgram& program, const Workspace& ws) {
    Workspace copy = ws;
    std::vector<dmp::Trajectory> out;
    out.reserve(program.calls.size());
    for (const auto& call : program.calls) {
        if (call.kind == PrimitiveKind::go_to || call.kind == PrimitiveKind::dmp) {
            const auto& target = call.args.at(0);
            if (const auto* obj = std::get_if<ObjectTarget>(&target)) {
                ground_object(obj->canonical_name, copy.registry, copy.scene, nullptr);  // throws UngroundedObject
            }
        }
        SkillOutcome o = execute_primitive(call, copy, false);
        out.push_back(std::move(o.trajectory));
        if (!o.ok()) break;
    }
    return out;
}

nlohmann::json trajectory_to_json(const dmp::Trajectory& trajectory) {
    nlohmann::json poses = nlohmann::json::array();
    for (const auto& p : trajectory.poses) poses.push_back(pose_to_json(p));
    return {{"dt", trajectory.dt}, {"poses", poses}};
}

}  // namespace vsandbox
