#include "skillforge/kinematics/quaternion.h"

#include <cmath>
#include <string>

#include "skillforge/common/error.h"

namespace skillforge {

Quaternion Quaternion::fromAxisAngle(const Vec3& axis, double angle) {
  const Vec3 n = axis.normalized();
  const double s = std::sin(0.5 * angle);
  return {std::cos(0.5 * angle), n.x() * s, n.y() * s, n.z() * s};
}

Quaternion Quaternion::fromRotationVector(const Vec3& v) {
  return quatExp(0.5 * v);
}

double Quaternion::norm() const {
  return std::sqrt(w * w + x * x + y * y + z * z);
}

Quaternion Quaternion::normalized() const {
  const double n = norm();
  return {w / n, x / n, y / n, z / n};
}

Vec3 Quaternion::rotate(const Vec3& v) const {
  // v' = v + 2w(u x v) + 2u x (u x v)
  const Vec3 u(x, y, z);
  const Vec3 t = 2.0 * u.cross(v);
  return v + w * t + u.cross(t);
}

Mat3 Quaternion::toMatrix() const {
  Mat3 m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return m;
}

Vec3 Quaternion::toRotationVector() const {
  return 2.0 * quatLog(w < 0.0 ? -*this : *this);
}

Quaternion multiplyRaw(const Quaternion& a, const Quaternion& b) {
  return {
      a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
      a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
      a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
      a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Quaternion operator*(const Quaternion& a, const Quaternion& b) {
  return multiplyRaw(a, b).normalized();
}

Vec3 quatLog(const Quaternion& q) {
  const Vec3 v(q.x, q.y, q.z);
  const double n = v.norm();
  if (n < 1e-12) {
    // first-order series; exact at n == 0
    return v / q.w;
  }
  return v * (std::atan2(n, q.w) / n);
}

Quaternion quatExp(const Vec3& v) {
  const double n = v.norm();
  if (n < 1e-12) {
    return Quaternion{1.0, v.x(), v.y(), v.z()}.normalized();
  }
  const double s = std::sin(n) / n;
  return {std::cos(n), v.x() * s, v.y() * s, v.z() * s};
}

Quaternion slerp(const Quaternion& a, const Quaternion& b, double u) {
  if (u == 0.0) {
    return a;
  }
  if (u == 1.0) {
    return b;
  }
  Quaternion target = b;
  double cosTheta = a.dot(b);
  if (cosTheta < 0.0) {
    target = -b;
    cosTheta = -cosTheta;
  }
  if (cosTheta > 1.0 - 1e-12) {
    return Quaternion{
        a.w + u * (target.w - a.w),
        a.x + u * (target.x - a.x),
        a.y + u * (target.y - a.y),
        a.z + u * (target.z - a.z)}
        .normalized();
  }
  const double theta = std::acos(cosTheta);
  const double s = std::sin(theta);
  const double ka = std::sin((1.0 - u) * theta) / s;
  const double kb = std::sin(u * theta) / s;
  return Quaternion{
      ka * a.w + kb * target.w,
      ka * a.x + kb * target.x,
      ka * a.y + kb * target.y,
      ka * a.z + kb * target.z}
      .normalized();
}

Vec3 quatDifference(const Quaternion& q1, const Quaternion& q2) {
  throwIf(
      std::abs(q1.norm() - 1.0) > 1e-6 || std::abs(q2.norm() - 1.0) > 1e-6,
      "quatDifference: inputs must be unit quaternions");
  return multiplyRaw(q1.conjugate(), q2).toRotationVector();
}

double geodesicAngle(const Quaternion& a, const Quaternion& b) {
  return multiplyRaw(a.conjugate(), b).toRotationVector().norm();
}

}  // namespace skillforge
