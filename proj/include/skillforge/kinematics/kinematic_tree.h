#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "skillforge/kinematics/quaternion.h"

namespace skillforge {

struct Transform {
  Vec3 position = Vec3::Zero();
  Quaternion orientation;

  static Transform identity() {
    return {};
  }

  Transform operator*(const Transform& rhs) const {
    return {position + orientation.rotate(rhs.position), orientation * rhs.orientation};
  }
  Transform inverse() const {
    const Quaternion inv = orientation.conjugate();
    return {-inv.rotate(position), inv};
  }
  Vec3 apply(const Vec3& point) const {
    return position + orientation.rotate(point);
  }
};

struct Body {
  std::string name;
  int parent = -1;
  Transform offset;
};

// Revolute joint rotating its body about `axis` (body frame, after the offset).
struct HingeJoint {
  std::string name;
  int body = 0;
  Vec3 axis = Vec3::UnitZ();
  double lower = -1e9;
  double upper = 1e9;
  double velocityLimit = 1e9;
  double reference = 0.0;
};

struct Marker {
  std::string name;
  int body = 0;
  Vec3 offset = Vec3::Zero();
  // Fixed markers keep their declared offset during marker optimization.
  bool fixed = false;
};

// One reflection symmetry of the robot. `axis` is the world/body axis that the
// reflection negates (1 = lateral y for left-right, 0 = x for front-back).
struct Symmetry {
  int axis = 1;
  std::vector<int> bodies;
  std::vector<int> joints;
  std::vector<double> jointSigns;
  std::vector<int> markers;
};

struct SymmetryMap {
  std::optional<Symmetry> lateral;
  std::optional<Symmetry> longitudinal;
};

class KinematicTree {
 public:
  std::string name;
  std::vector<Body> bodies;
  std::vector<HingeJoint> joints;
  std::vector<Marker> markers;
  std::vector<int> endEffectors;
  SymmetryMap symmetry;

  size_t jointCount() const {
    return joints.size();
  }

  // Checks topological order, single root, index ranges and involutive
  // symmetry maps, then builds lookup tables. Throws InvalidInput.
  void finalize();

  // Joints acting on a body, in declaration order.
  const std::vector<int>& jointsOfBody(int body) const {
    return jointsOfBody_[body];
  }
  // True when `ancestor` lies on the path from `body` to the root (inclusive).
  bool isAncestor(int ancestor, int body) const;

  int bodyIndex(const std::string& name) const;
  int jointIndex(const std::string& name) const;
  int markerIndex(const std::string& name) const;

  Eigen::VectorXd referencePose() const;
  Eigen::VectorXd lowerLimits() const;
  Eigen::VectorXd upperLimits() const;
  Eigen::VectorXd velocityLimits() const;

 private:
  std::vector<std::vector<int>> jointsOfBody_;
};

struct Pose {
  Transform root;
  Eigen::VectorXd q;
};

struct KinematicsResult {
  std::vector<Transform> bodies;
  std::vector<Vec3> markers;
  std::vector<Vec3> endEffectors;
};

// World transforms by chained composition from the root:
// world(b) = world(parent) * offset(b) * prod_k R(axis_k, q_k).
// The root body is placed at pose.root * offset(root). `markerOffsets`
// overrides the tree's marker offsets when non-empty.
KinematicsResult forwardKinematics(
    const KinematicTree& tree,
    const Pose& pose,
    std::span<const Vec3> markerOffsets = {});

// Analytic d(marker positions)/dq. Rows ordered (marker, xyz), columns by joint.
Eigen::MatrixXd markerJacobian(
    const KinematicTree& tree,
    const Pose& pose,
    std::span<const int> markerIndices,
    std::span<const Vec3> markerOffsets = {});

// Same as markerJacobian but with six leading columns for the root: world
// translation then world-frame rotation vector increment.
Eigen::MatrixXd markerJacobianWithRoot(
    const KinematicTree& tree,
    const Pose& pose,
    std::span<const int> markerIndices,
    std::span<const Vec3> markerOffsets = {});

KinematicTree parseTree(const nlohmann::json& doc);
KinematicTree loadTree(const std::string& path);
nlohmann::json treeToJson(const KinematicTree& tree);
void saveTree(const KinematicTree& tree, const std::string& path);

// Planar chain in the x-z plane: a free base plus `links` hinge joints about
// the y axis, each link `linkLength` long along x. Markers sit at each link
// tip (free) and halfway along each link (fixed); three fixed markers on the
// base anchor the root pose.
KinematicTree makePlanarChain(int links, double linkLength = 0.3);

}  // namespace skillforge
