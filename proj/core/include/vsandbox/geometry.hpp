// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

// Exact coefficient equality, so value types holding quaternions can default ==.
namespace Eigen {
inline bool operator==(const Quaterniond& a, const Quaterniond& b) { return a.coeffs() == b.coeffs(); }
inline bool operator!=(const Quaterniond& a, const Quaterniond& b) { return !(a == b); }
}  // namespace Eigen

namespace vsandbox {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

/// End-effector or object pose: position in meters, unit-quaternion orientation.
struct Pose {
    Vec3 position = Vec3::Zero();
    Quat orientation = Quat::Identity();

    static Pose at(double x, double y, double z) { return {Vec3(x, y, z), Quat::Identity()}; }
};

bool operator==(const Pose& a, const Pose& b);
inline bool operator!=(const Pose& a, const Pose& b) { return !(a == b); }

/// True when |q| is 1 within tol.
bool is_unit(const Quat& q, double tol = 1e-6);

/// Spherical interpolation taking the short arc; s in [0, 1].
Quat slerp(const Quat& from, const Quat& to, double s);

/// Axis-aligned workspace box.
struct Bounds {
    Vec3 min = Vec3(0.0, -0.75, 0.0);
    Vec3 max = Vec3(1.0, 0.75, 0.8);

    bool contains(const Vec3& p, double tol = 1e-9) const;
    bool operator==(const Bounds&) const = default;
};

// JSON forms: position [x, y, z]; orientation [w, x, y, z].
nlohmann::json vec3_to_json(const Vec3& v);
Vec3 vec3_from_json(const nlohmann::json& j);
nlohmann::json quat_to_json(const Quat& q);
Quat quat_from_json(const nlohmann::json& j);
nlohmann::json pose_to_json(const Pose& p);
Pose pose_from_json(const nlohmann::json& j);

}  // namespace vsandbox
