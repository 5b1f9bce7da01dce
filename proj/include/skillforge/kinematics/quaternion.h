#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace skillforge {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Unit quaternion, stored w-first. q and -q describe the same rotation.
struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static Quaternion identity() {
    return {};
  }
  static Quaternion fromAxisAngle(const Vec3& axis, double angle);
  // Exponential map of a rotation vector (axis * angle).
  static Quaternion fromRotationVector(const Vec3& v);

  double norm() const;
  Quaternion normalized() const;
  Quaternion conjugate() const {
    return {w, -x, -y, -z};
  }
  Quaternion operator-() const {
    return {-w, -x, -y, -z};
  }
  double dot(const Quaternion& o) const {
    return w * o.w + x * o.x + y * o.y + z * o.z;
  }

  Vec3 rotate(const Vec3& v) const;
  Mat3 toMatrix() const;
  // Rotation vector of this rotation with angle in [0, pi].
  Vec3 toRotationVector() const;

  bool operator==(const Quaternion& o) const = default;
};

// Hamilton product, normalized afterwards to bound drift.
Quaternion operator*(const Quaternion& a, const Quaternion& b);

// Raw product without renormalization; used where exact algebra matters.
Quaternion multiplyRaw(const Quaternion& a, const Quaternion& b);

// Log of a unit quaternion as the pure-quaternion vector part (half-angle * axis).
Vec3 quatLog(const Quaternion& q);
// Inverse of quatLog.
Quaternion quatExp(const Vec3& v);

Quaternion slerp(const Quaternion& a, const Quaternion& b, double u);

// Rotation vector of q1^-1 * q2, taking the short way round (|result| <= pi).
// Rejects inputs whose norm deviates from one by more than 1e-6.
Vec3 quatDifference(const Quaternion& q1, const Quaternion& q2);

// Geodesic angle between two rotations in [0, pi].
double geodesicAngle(const Quaternion& a, const Quaternion& b);

}  // namespace skillforge
