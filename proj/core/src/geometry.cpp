// SPDX-License-Identifier: Apache-2.0
#include "vsandbox/geometry.hpp"

#include <cmath>

#include "vsandbox/error.hpp"

namespace vsandbox {

bool operator==(const Pose& a, const Pose& b) {
    return a.position == b.position && a.orientation.coeffs() == b.orientation.coeffs();
}

bool is_unit(const Quat& q, double tol) { return std::abs(q.norm() - 1.0) <= tol; }

Quat slerp(const Quat& from, const Quat& to, double s) {
    if (s <= 0.0) return from;
    if (s >= 1.0) return to;
    return from.slerp(s, to).normalized();
}

bool Bounds::contains(const Vec3& p, double tol) const {
    for (int i = 0; i < 3; ++i) {
        if (!(p[i] >= min[i] - tol && p[i] <= max[i] + tol)) return false;
    }
    return true;
}

nlohmann::json vec3_to_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Vec3 vec3_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 3) {
        throw Error(ErrorCode::MalformedDocument, "expected a 3-element position array");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

nlohmann::json quat_to_json(const Quat& q) { return {q.w(), q.x(), q.y(), q.z()}; }

Quat quat_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 4) {
        throw Error(ErrorCode::MalformedDocument, "expected a 4-element [w, x, y, z] quaternion");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

nlohmann::json pose_to_json(const Pose& p) {
    return {{"position", vec3_to_json(p.position)}, {"orientation", quat_to_json(p.orientation)}};
}

Pose pose_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("position")) {
        throw Error(ErrorCode::MalformedDocument, "pose must be an object with a position");
    }
    Pose p;
    p.position = vec3_from_json(j.at("position"));
    p.orientation = j.contains("orientation") ? quat_from_json(j.at("orientation")) : Quat::Identity();
    return p;
}

}  // namespace vsandbox
