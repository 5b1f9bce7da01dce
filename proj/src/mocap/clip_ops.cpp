#include "skillforge/mocap/clip_ops.h"

#include <cmath>

#include "skillforge/common/error.h"

namespace skillforge {

namespace {

// Cubic Hermite form of the Catmull-Rom segment between p1 and p2, written in
// differences so that constant data reproduces exactly.
template <typename T>
T catmullRom(const T& p0, const T& p1, const T& p2, const T& p3, double u) {
  if (u == 0.0) {
    return p1;
  }
  const T d0 = p1 - p0;
  const T d1 = p2 - p1;
  const T d2 = p3 - p2;
  const T m1 = 0.5 * (d0 + d1);
  const T m2 = 0.5 * (d1 + d2);
  const T c2 = 3.0 * d1 - 2.0 * m1 - m2;
  const T c3 = m1 + m2 - 2.0 * d1;
  return p1 + u * (m1 + u * (c2 + u * c3));
}

// Sample sequence with quadratic extrapolation for the two ghost points.
template <typename T>
T splineAt(const std::vector<T>& p, size_t i, double u) {
  const size_t n = p.size();
  if (u == 0.0) {
    return p[i];
  }
  const T prev = i > 0 ? p[i - 1] : T(3.0 * p[0] - 3.0 * p[1] + p[2]);
  const T next = i + 2 < n ? p[i + 2] : T(3.0 * p[n - 1] - 3.0 * p[n - 2] + p[n - 3]);
  return catmullRom(prev, p[i], p[i + 1], next, u);
}

template <typename T>
T linearAt(const std::vector<T>& p, size_t i, double u) {
  if (u == 0.0) {
    return p[i];
  }
  return p[i] + u * (p[i + 1] - p[i]);
}

std::vector<Quaternion> alignHemispheres(std::vector<Quaternion> q) {
  for (size_t i = 1; i < q.size(); ++i) {
    if (q[i - 1].dot(q[i]) < 0.0) {
      q[i] = -q[i];
    }
  }
  return q;
}

// Inner SQUAD control points s_i = q_i exp(-(log(q_i^-1 q_{i+1}) + log(q_i^-1 q_{i-1})) / 4).
std::vector<Quaternion> squadControls(const std::vector<Quaternion>& q) {
  std::vector<Quaternion> s(q.size());
  s.front() = q.front();
  s.back() = q.back();
  for (size_t i = 1; i + 1 < q.size(); ++i) {
    const Quaternion inv = q[i].conjugate();
    const Vec3 sum = quatLog(multiplyRaw(inv, q[i + 1])) + quatLog(multiplyRaw(inv, q[i - 1]));
    if (sum.isZero(0.0)) {
      s[i] = q[i];
    } else {
      s[i] = multiplyRaw(q[i], quatExp(-0.25 * sum)).normalized();
    }
  }
  return s;
}

Quaternion slerpSame(const Quaternion& a, const Quaternion& b, double u) {
  return a == b ? a : slerp(a, b, u);
}

Quaternion squadAt(
    const std::vector<Quaternion>& q,
    const std::vector<Quaternion>& s,
    size_t i,
    double u) {
  if (u == 0.0) {
    return q[i];
  }
  const Quaternion outer = slerpSame(q[i], q[i + 1], u);
  const Quaternion inner = slerpSame(s[i], s[i + 1], u);
  return slerpSame(outer, inner, 2.0 * u * (1.0 - u));
}

// Per-channel sampler over a clip's frames.
struct Channels {
  std::vector<Vec3> rootPos;
  std::vector<Quaternion> rootQuat;
  std::vector<Quaternion> rootControls;
  std::vector<Eigen::VectorXd> q;
  std::vector<std::vector<Vec3>> bodyPos;
  std::vector<std::vector<Quaternion>> bodyQuat;
  std::vector<std::vector<Quaternion>> bodyControls;
  std::vector<std::vector<Vec3>> markers;
};

Channels extract(const MotionClip& clip, bool spline) {
  Channels c;
  const size_t nb = clip.frames.front().bodies.size();
  const size_t nm = clip.frames.front().markers.size();
  c.bodyPos.resize(nb);
  c.bodyQuat.resize(nb);
  c.markers.resize(nm);
  for (const auto& f : clip.frames) {
    c.rootPos.push_back(f.root.position);
    c.rootQuat.push_back(f.root.orientation);
    c.q.push_back(f.q);
    for (size_t b = 0; b < nb; ++b) {
      c.bodyPos[b].push_back(f.bodies[b].position);
      c.bodyQuat[b].push_back(f.bodies[b].orientation);
    }
    for (size_t m = 0; m < nm; ++m) c.markers[m].push_back(f.markers[m]);
  }
  c.rootQuat = alignHemispheres(c.rootQuat);
  for (auto& bq : c.bodyQuat) bq = alignHemispheres(bq);
  if (spline) {
    c.rootControls = squadControls(c.rootQuat);
    for (const auto& bq : c.bodyQuat) c.bodyControls.push_back(squadControls(bq));
  }
  return c;
}

}  // namespace

MotionClip interpolateClip(const MotionClip& clip, double targetRate) {
  throwIf(!(targetRate > 0.0), "interpolate: target rate must be > 0");
  clip.validate();
  const size_t n = clip.frames.size();
  const bool spline = n >= 4;
  const Channels c = extract(clip, spline);

  MotionClip out;
  out.name = clip.name;
  out.rate = targetRate;
  out.metadata = clip.metadata;
  out.metadata["interpolation"] = spline ? "cubic+squad" : "linear";
  out.metadata["source_rate"] = std::to_string(clip.rate);

  const double ratio = clip.rate / targetRate;
  const auto count = static_cast<size_t>(std::floor((n - 1) / ratio + 1e-9)) + 1;
  for (size_t k = 0; k < count; ++k) {
    const double x = static_cast<double>(k) * ratio;
    auto i = static_cast<size_t>(std::floor(x));
    double u = x - static_cast<double>(i);
    if (u > 1.0 - 1e-9) {
      ++i;
      u = 0.0;
    } else if (u < 1e-9) {
      u = 0.0;
    }
    if (i >= n - 1) {
      i = n - 1;
      u = 0.0;
    }
    // segment index must leave room for i + 1 when u > 0
    MotionFrame f;
    if (u == 0.0) {
      f = clip.frames[i];
      f.root.orientation = c.rootQuat[i];
      for (size_t b = 0; b < f.bodies.size(); ++b) f.bodies[b].orientation = c.bodyQuat[b][i];
      out.frames.push_back(std::move(f));
      continue;
    }
    if (spline) {
      f.root.position = splineAt(c.rootPos, i, u);
      f.root.orientation = squadAt(c.rootQuat, c.rootControls, i, u);
      f.q = splineAt(c.q, i, u);
      for (size_t b = 0; b < c.bodyPos.size(); ++b) {
        f.bodies.push_back({splineAt(c.bodyPos[b], i, u), squadAt(c.bodyQuat[b], c.bodyControls[b], i, u)});
      }
      for (const auto& m : c.markers) f.markers.push_back(splineAt(m, i, u));
    } else {
      f.root.position = linearAt(c.rootPos, i, u);
      f.root.orientation = slerpSame(c.rootQuat[i], c.rootQuat[i + 1], u);
      f.q = linearAt(c.q, i, u);
      for (size_t b = 0; b < c.bodyPos.size(); ++b) {
        f.bodies.push_back({linearAt(c.bodyPos[b], i, u), slerpSame(c.bodyQuat[b][i], c.bodyQuat[b][i + 1], u)});
      }
      for (const auto& m : c.markers) f.markers.push_back(linearAt(m, i, u));
    }
    out.frames.push_back(std::move(f));
  }
  return out;
}

namespace {

Vec3 reflectPoint(const Vec3& p, int axis) {
  Vec3 r = p;
  r[axis] = -r[axis];
  return r;
}

// Conjugation S R S by the reflection S: the axial vector part maps to -S v.
Quaternion reflectRotation(const Quaternion& q, int axis) {
  Quaternion r{q.w, -q.x, -q.y, -q.z};
  double* v[3] = {&r.x, &r.y, &r.z};
  *v[axis] = -*v[axis];
  return r;
}

Transform reflect(const Transform& t, int axis) {
  return {reflectPoint(t.position, axis), reflectRotation(t.orientation, axis)};
}

MotionClip mirrorWith(const MotionClip& clip, const KinematicTree& tree, const Symmetry& s) {
  clip.validate();
  const int axis = s.axis;
  MotionClip out = clip;
  for (size_t i = 0; i < clip.frames.size(); ++i) {
    const auto& src = clip.frames[i];
    auto& dst = out.frames[i];
    throwIf(
        static_cast<size_t>(src.q.size()) != tree.jointCount(),
        "mirror: clip joint count does not match the tree");
    dst.root = reflect(src.root, axis);
    for (size_t j = 0; j < tree.jointCount(); ++j) {
      dst.q[j] = s.jointSigns[j] * src.q[s.joints[j]];
    }
    if (!src.bodies.empty()) {
      throwIf(src.bodies.size() != tree.bodies.size(), "mirror: clip body count does not match the tree");
      for (size_t b = 0; b < src.bodies.size(); ++b) {
        dst.bodies[b] = reflect(src.bodies[s.bodies[b]], axis);
      }
    }
    if (!src.markers.empty()) {
      throwIf(
          src.markers.size() != tree.markers.size(),
          "mirror: clip markers do not correspond to the tree's marker set");
      for (size_t m = 0; m < src.markers.size(); ++m) {
        dst.markers[m] = reflectPoint(src.markers[s.markers[m]], axis);
      }
    }
  }
  return out;
}

}  // namespace

MotionClip mirrorClip(const MotionClip& clip, const KinematicTree& tree) {
  throwIf(!tree.symmetry.lateral, "mirror: tree '" + tree.name + "' has no lateral symmetry map");
  MotionClip out = mirrorWith(clip, tree, *tree.symmetry.lateral);
  return out;
}

MotionClip mirrorClipLongitudinal(const MotionClip& clip, const KinematicTree& tree) {
  throwIf(
      !tree.symmetry.longitudinal,
      "mirror: tree '" + tree.name + "' has no longitudinal symmetry map");
  return mirrorWith(clip, tree, *tree.symmetry.longitudinal);
}

namespace {

std::vector<bool> rejectedFrames(
    const MotionClip& clip,
    const KinematicTree& tree,
    const FilterOptions& options) {
  const size_t n = clip.frames.size();
  std::vector<bool> bad(n, false);
  const auto lower = tree.lowerLimits();
  const auto upper = tree.upperLimits();
  const auto vmax = tree.velocityLimits();

  for (size_t i = 0; i < n; ++i) {
    const auto& q = clip.frames[i].q;
    throwIf(
        static_cast<size_t>(q.size()) != tree.jointCount(),
        "filter: clip '" + clip.name + "' joint count does not match the tree");
    if ((q.array() < lower.array()).any() || (q.array() > upper.array()).any()) {
      bad[i] = true;
    }
    // forward difference, backward for the final frame
    const size_t a = i + 1 < n ? i : i - 1;
    const Eigen::VectorXd vel = (clip.frames[a + 1].q - clip.frames[a].q) * clip.rate;
    if ((vel.array().abs() > vmax.array()).any()) {
      bad[i] = true;
    }
    if (options.checkFeet && !tree.endEffectors.empty()) {
      const auto fk = forwardKinematics(tree, Pose{clip.frames[i].root, q});
      bool allOff = true;
      for (const auto& p : fk.endEffectors) {
        if (std::abs(p.z() - options.groundHeight) <= options.footHeightTolerance) {
          allOff = false;
        }
      }
      if (allOff) {
        bad[i] = true;
      }
    }
  }

  // stationary runs
  std::vector<bool> slow(n);
  for (size_t i = 0; i < n; ++i) {
    const size_t a = i + 1 < n ? i : i - 1;
    const Vec3 d = clip.frames[a + 1].root.position - clip.frames[a].root.position;
    slow[i] = std::hypot(d.x(), d.y()) * clip.rate < options.stationaryVelocity;
  }
  for (size_t i = 0; i < n;) {
    if (!slow[i]) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j < n && slow[j]) ++j;
    if (static_cast<double>(j - i) / clip.rate >= options.stationaryWindow) {
      for (size_t k = i; k < j; ++k) bad[k] = true;
    }
    i = j;
  }
  return bad;
}

MotionClip subClip(const MotionClip& clip, size_t begin, size_t end, const std::string& name) {
  MotionClip out;
  out.name = name;
  out.rate = clip.rate;
  out.metadata = clip.metadata;
  out.metadata["source"] = clip.name;
  out.metadata["source_start"] = std::to_string(begin);
  out.frames.assign(clip.frames.begin() + static_cast<std::ptrdiff_t>(begin),
                    clip.frames.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

}  // namespace

ClipDataset filterClips(
    const ClipDataset& dataset,
    const KinematicTree& tree,
    const FilterOptions& options) {
  ClipDataset out;
  for (const auto& clip : dataset.clips) {
    clip.validate();
    const auto bad = rejectedFrames(clip, tree, options);
    std::vector<std::pair<size_t, size_t>> spans;
    for (size_t i = 0; i < bad.size();) {
      if (bad[i]) {
        ++i;
        continue;
      }
      size_t j = i;
      while (j < bad.size() && !bad[j]) ++j;
      if (j - i >= 2) spans.emplace_back(i, j);
      i = j;
    }
    if (spans.size() == 1 && spans[0].first == 0 && spans[0].second == clip.frames.size()) {
      out.clips.push_back(clip);
      continue;
    }
    for (size_t s = 0; s < spans.size(); ++s) {
      out.clips.push_back(subClip(clip, spans[s].first, spans[s].second, clip.name + "_s" + std::to_string(s)));
    }
  }
  return out;
}

ClipDataset chunkClips(const ClipDataset& dataset, double maxLength) {
  throwIf(!(maxLength > 0.0), "chunk: max length must be > 0");
  ClipDataset out;
  for (const auto& clip : dataset.clips) {
    clip.validate();
    const auto cap = static_cast<size_t>(std::floor(maxLength * clip.rate + 1e-9));
    throwIf(cap < 2, "chunk: max length is shorter than two frames of clip '" + clip.name + "'");
    const size_t n = clip.frames.size();
    if (n <= cap) {
      out.clips.push_back(clip);
      continue;
    }
    std::vector<size_t> sizes(n / cap, cap);
    if (n % cap != 0) sizes.push_back(n % cap);
    if (sizes.back() == 1) {
      // a one-frame tail cannot form a clip; borrow a frame from its neighbour
      sizes[sizes.size() - 2] -= 1;
      sizes.back() = 2;
    }
    size_t begin = 0;
    for (size_t c = 0; c < sizes.size(); ++c) {
      out.clips.push_back(subClip(clip, begin, begin + sizes[c], clip.name + "_c" + std::to_string(c)));
      begin += sizes[c];
    }
  }
  return out;
}

}  // namespace skillforge
