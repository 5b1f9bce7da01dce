#include "skillforge/kinematics/kinematic_tree.h"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "skillforge/common/error.h"

namespace skillforge {

using nlohmann::json;

namespace {

void checkPermutation(
    const std::vector<int>& map,
    size_t size,
    const std::string& what) {
  throwIf(
      map.size() != size,
      "tree: symmetry map for " + what + " has " + std::to_string(map.size()) +
          " entries, expected " + std::to_string(size));
  for (size_t i = 0; i < map.size(); ++i) {
    throwIf(
        map[i] < 0 || static_cast<size_t>(map[i]) >= size,
        "tree: symmetry map for " + what + " has out-of-range entry");
    throwIf(
        static_cast<size_t>(map[map[i]]) != i,
        "tree: symmetry map for " + what + " is not an involution at index " +
            std::to_string(i));
  }
}

void checkSymmetry(const KinematicTree& tree, const Symmetry& s, const std::string& label) {
  throwIf(s.axis < 0 || s.axis > 2, "tree: " + label + " symmetry axis must be 0, 1 or 2");
  checkPermutation(s.bodies, tree.bodies.size(), label + " bodies");
  checkPermutation(s.joints, tree.joints.size(), label + " joints");
  checkPermutation(s.markers, tree.markers.size(), label + " markers");
  throwIf(
      s.jointSigns.size() != tree.joints.size(),
      "tree: " + label + " symmetry needs one sign per joint");
  for (size_t j = 0; j < s.joints.size(); ++j) {
    throwIf(
        std::abs(s.jointSigns[j]) != 1.0,
        "tree: " + label + " joint signs must be +1 or -1");
    throwIf(
        s.jointSigns[j] != s.jointSigns[s.joints[j]],
        "tree: " + label + " paired joints must share a sign");
  }
  for (size_t m = 0; m < tree.markers.size(); ++m) {
    const auto& a = tree.markers[m];
    const auto& b = tree.markers[s.markers[m]];
    throwIf(
        s.bodies[a.body] != b.body,
        "tree: " + label + " marker pairing '" + a.name + "'/'" + b.name +
            "' does not follow the body pairing");
  }
}

Vec3 readVec3(const json& j, const std::string& where) {
  throwIf(!j.is_array() || j.size() != 3, "tree: " + where + " must be a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Quaternion readQuat(const json& j, const std::string& where) {
  throwIf(!j.is_array() || j.size() != 4, "tree: " + where + " must be a quaternion [w,x,y,z]");
  Quaternion q{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  throwIf(std::abs(q.norm() - 1.0) > 1e-6, "tree: " + where + " is not a unit quaternion");
  return q.normalized();
}

Symmetry parseSymmetry(const json& j, const KinematicTree& tree, int defaultAxis) {
  Symmetry s;
  s.axis = j.value("axis", defaultAxis);
  s.bodies.resize(tree.bodies.size());
  s.joints.resize(tree.joints.size());
  s.jointSigns.assign(tree.joints.size(), 1.0);
  s.markers.resize(tree.markers.size());
  for (size_t i = 0; i < s.bodies.size(); ++i) s.bodies[i] = static_cast<int>(i);
  for (size_t i = 0; i < s.joints.size(); ++i) s.joints[i] = static_cast<int>(i);
  for (size_t i = 0; i < s.markers.size(); ++i) s.markers[i] = static_cast<int>(i);

  for (const auto& pair : j.value("bodies", json::array())) {
    const int a = tree.bodyIndex(pair.at(0).get<std::string>());
    const int b = tree.bodyIndex(pair.at(1).get<std::string>());
    s.bodies[a] = b;
    s.bodies[b] = a;
  }
  for (const auto& entry : j.value("joints", json::array())) {
    const int a = tree.jointIndex(entry.at(0).get<std::string>());
    const int b = tree.jointIndex(entry.at(1).get<std::string>());
    const double sign = entry.size() > 2 ? entry.at(2).get<double>() : 1.0;
    s.joints[a] = b;
    s.joints[b] = a;
    s.jointSigns[a] = sign;
    s.jointSigns[b] = sign;
  }
  for (const auto& pair : j.value("markers", json::array())) {
    const int a = tree.markerIndex(pair.at(0).get<std::string>());
    const int b = tree.markerIndex(pair.at(1).get<std::string>());
    s.markers[a] = b;
    s.markers[b] = a;
  }
  return s;
}

json symmetryToJson(const KinematicTree& tree, const Symmetry& s) {
  json j;
  j["axis"] = s.axis;
  j["bodies"] = json::array();
  j["joints"] = json::array();
  j["markers"] = json::array();
  for (size_t i = 0; i < s.bodies.size(); ++i) {
    if (static_cast<size_t>(s.bodies[i]) > i) {
      j["bodies"].push_back({tree.bodies[i].name, tree.bodies[s.bodies[i]].name});
    }
  }
  for (size_t i = 0; i < s.joints.size(); ++i) {
    if (static_cast<size_t>(s.joints[i]) >= i &&
        (static_cast<size_t>(s.joints[i]) != i || s.jointSigns[i] != 1.0)) {
      j["joints"].push_back(
          {tree.joints[i].name, tree.joints[s.joints[i]].name, s.jointSigns[i]});
    }
  }
  for (size_t i = 0; i < s.markers.size(); ++i) {
    if (static_cast<size_t>(s.markers[i]) > i) {
      j["markers"].push_back({tree.markers[i].name, tree.markers[s.markers[i]].name});
    }
  }
  return j;
}

}  // namespace

void KinematicTree::finalize() {
  throwIf(bodies.empty(), "tree: at least one body is required");
  throwIf(bodies[0].parent != -1, "tree: the first body must be the root");
  for (size_t b = 1; b < bodies.size(); ++b) {
    throwIf(
        bodies[b].parent < 0,
        "tree: body '" + bodies[b].name + "' has no parent; exactly one root is allowed");
    throwIf(
        bodies[b].parent >= static_cast<int>(b),
        "tree: body '" + bodies[b].name + "' must come after its parent");
  }
  jointsOfBody_.assign(bodies.size(), {});
  for (size_t j = 0; j < joints.size(); ++j) {
    auto& joint = joints[j];
    throwIf(
        joint.body < 0 || joint.body >= static_cast<int>(bodies.size()),
        "tree: joint '" + joint.name + "' references an invalid body");
    throwIf(
        std::abs(joint.axis.norm() - 1.0) > 1e-6,
        "tree: joint '" + joint.name + "' axis must be a unit vector");
    throwIf(joint.lower > joint.upper, "tree: joint '" + joint.name + "' has lower > upper");
    throwIf(joint.velocityLimit <= 0.0, "tree: joint '" + joint.name + "' velocity limit must be > 0");
    joint.axis.normalize();
    jointsOfBody_[joint.body].push_back(static_cast<int>(j));
  }
  for (const auto& m : markers) {
    throwIf(
        m.body < 0 || m.body >= static_cast<int>(bodies.size()),
        "tree: marker '" + m.name + "' references an invalid body");
  }
  for (int e : endEffectors) {
    throwIf(
        e < 0 || e >= static_cast<int>(bodies.size()),
        "tree: end effector index out of range");
  }
  if (symmetry.lateral) {
    checkSymmetry(*this, *symmetry.lateral, "lateral");
  }
  if (symmetry.longitudinal) {
    checkSymmetry(*this, *symmetry.longitudinal, "longitudinal");
  }
}

bool KinematicTree::isAncestor(int ancestor, int body) const {
  for (int b = body; b >= 0; b = bodies[b].parent) {
    if (b == ancestor) {
      return true;
    }
  }
  return false;
}

int KinematicTree::bodyIndex(const std::string& n) const {
  for (size_t i = 0; i < bodies.size(); ++i) {
    if (bodies[i].name == n) return static_cast<int>(i);
  }
  throw InvalidInput("tree: unknown body '" + n + "'");
}

int KinematicTree::jointIndex(const std::string& n) const {
  for (size_t i = 0; i < joints.size(); ++i) {
    if (joints[i].name == n) return static_cast<int>(i);
  }
  throw InvalidInput("tree: unknown joint '" + n + "'");
}

int KinematicTree::markerIndex(const std::string& n) const {
  for (size_t i = 0; i < markers.size(); ++i) {
    if (markers[i].name == n) return static_cast<int>(i);
  }
  throw InvalidInput("tree: unknown marker '" + n + "'");
}

Eigen::VectorXd KinematicTree::referencePose() const {
  Eigen::VectorXd q(joints.size());
  for (size_t j = 0; j < joints.size(); ++j) q[j] = joints[j].reference;
  return q;
}

Eigen::VectorXd KinematicTree::lowerLimits() const {
  Eigen::VectorXd q(joints.size());
  for (size_t j = 0; j < joints.size(); ++j) q[j] = joints[j].lower;
  return q;
}

Eigen::VectorXd KinematicTree::upperLimits() const {
  Eigen::VectorXd q(joints.size());
  for (size_t j = 0; j < joints.size(); ++j) q[j] = joints[j].upper;
  return q;
}

Eigen::VectorXd KinematicTree::velocityLimits() const {
  Eigen::VectorXd q(joints.size());
  for (size_t j = 0; j < joints.size(); ++j) q[j] = joints[j].velocityLimit;
  return q;
}

namespace {

void checkPose(const KinematicTree& tree, const Pose& pose) {
  throwIf(
      static_cast<size_t>(pose.q.size()) != tree.jointCount(),
      "kinematics: pose has " + std::to_string(pose.q.size()) + " joint values, tree has " +
          std::to_string(tree.jointCount()) + " joints");
}

std::span<const Vec3> resolveOffsets(
    const KinematicTree& tree,
    std::span<const Vec3> overrides,
    std::vector<Vec3>& storage) {
  if (!overrides.empty()) {
    throwIf(
        overrides.size() != tree.markers.size(),
        "kinematics: marker offset count does not match the tree");
    return overrides;
  }
  storage.clear();
  for (const auto& m : tree.markers) storage.push_back(m.offset);
  return storage;
}

// World frame of each joint: origin and axis.
struct JointFrames {
  std::vector<Vec3> origin;
  std::vector<Vec3> axis;
};

std::vector<Transform> bodyTransforms(const KinematicTree& tree, const Pose& pose, JointFrames* frames) {
  std::vector<Transform> world(tree.bodies.size());
  if (frames) {
    frames->origin.resize(tree.jointCount());
    frames->axis.resize(tree.jointCount());
  }
  for (size_t b = 0; b < tree.bodies.size(); ++b) {
    const auto& body = tree.bodies[b];
    Transform t = (body.parent < 0 ? pose.root : world[body.parent]) * body.offset;
    for (int j : tree.jointsOfBody(static_cast<int>(b))) {
      const auto& joint = tree.joints[j];
      if (frames) {
        frames->origin[j] = t.position;
        frames->axis[j] = t.orientation.rotate(joint.axis);
      }
      t.orientation = t.orientation * Quaternion::fromAxisAngle(joint.axis, pose.q[j]);
    }
    world[b] = t;
  }
  return world;
}

}  // namespace

KinematicsResult forwardKinematics(
    const KinematicTree& tree,
    const Pose& pose,
    std::span<const Vec3> markerOffsets) {
  checkPose(tree, pose);
  std::vector<Vec3> storage;
  const auto offsets = resolveOffsets(tree, markerOffsets, storage);
  KinematicsResult result;
  result.bodies = bodyTransforms(tree, pose, nullptr);
  result.markers.reserve(tree.markers.size());
  for (size_t m = 0; m < tree.markers.size(); ++m) {
    result.markers.push_back(result.bodies[tree.markers[m].body].apply(offsets[m]));
  }
  for (int e : tree.endEffectors) {
    result.endEffectors.push_back(result.bodies[e].position);
  }
  return result;
}

namespace {

Eigen::MatrixXd jacobianImpl(
    const KinematicTree& tree,
    const Pose& pose,
    std::span<const int> markerIndices,
    std::span<const Vec3> markerOffsets,
    bool withRoot) {
  checkPose(tree, pose);
  std::vector<Vec3> storage;
  const auto offsets = resolveOffsets(tree, markerOffsets, storage);
  JointFrames frames;
  const auto world = bodyTransforms(tree, pose, &frames);
  const int rootCols = withRoot ? 6 : 0;
  const int nq = static_cast<int>(tree.jointCount());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(3 * markerIndices.size(), rootCols + nq);
  for (size_t row = 0; row < markerIndices.size(); ++row) {
    const int m = markerIndices[row];
    throwIf(
        m < 0 || m >= static_cast<int>(tree.markers.size()),
        "kinematics: marker index out of range");
    const int body = tree.markers[m].body;
    const Vec3 p = world[body].apply(offsets[m]);
    if (withRoot) {
      jac.block<3, 3>(3 * row, 0).setIdentity();
      // d(p)/d(omega) for R <- exp(omega) R about the root position
      const Vec3 r = p - pose.root.position;
      Mat3 skew;
      skew << 0, r.z(), -r.y(), -r.z(), 0, r.x(), r.y(), -r.x(), 0;
      jac.block<3, 3>(3 * row, 3) = skew;
    }
    for (int j = 0; j < nq; ++j) {
      if (!tree.isAncestor(tree.joints[j].body, body)) {
        continue;
      }
      jac.block<3, 1>(3 * row, rootCols + j) = frames.axis[j].cross(p - frames.origin[j]);
    }
  }
  return jac;
}

}  // namespace

Eigen::MatrixXd markerJacobian(
    const KinematicTree& tree,
    const Pose& pose,
    std::span<const int> markerIndices,
    std::span<const Vec3> markerOffsets) {
  return jacobianImpl(tree, pose, markerIndices, markerOffsets, false);
}

Eigen::MatrixXd markerJacobianWithRoot(
    const KinematicTree& tree,
    const Pose& pose,
    std::span<const int> markerIndices,
    std::span<const Vec3> markerOffsets) {
  return jacobianImpl(tree, pose, markerIndices, markerOffsets, true);
}

KinematicTree parseTree(const json& doc) {
  throwIf(
      doc.value("format", std::string()) != "tree/1",
      "tree: expected format \"tree/1\"");
  KinematicTree tree;
  tree.name = doc.value("name", std::string("robot"));
  try {
    for (const auto& b : doc.at("bodies")) {
      Body body;
      body.name = b.at("name").get<std::string>();
      if (b.contains("parent") && !b["parent"].is_null()) {
        body.parent = tree.bodyIndex(b["parent"].get<std::string>());
      }
      if (b.contains("pos")) body.offset.position = readVec3(b["pos"], "body '" + body.name + "' pos");
      if (b.contains("quat")) body.offset.orientation = readQuat(b["quat"], "body '" + body.name + "' quat");
      tree.bodies.push_back(body);
    }
    for (const auto& j : doc.value("joints", json::array())) {
      HingeJoint joint;
      joint.name = j.at("name").get<std::string>();
      const auto type = j.value("type", std::string("hinge"));
      throwIf(type != "hinge", "tree: joint '" + joint.name + "' has unsupported type '" + type + "'");
      joint.body = tree.bodyIndex(j.at("body").get<std::string>());
      if (j.contains("axis")) joint.axis = readVec3(j["axis"], "joint '" + joint.name + "' axis");
      if (j.contains("range")) {
        joint.lower = j["range"].at(0).get<double>();
        joint.upper = j["range"].at(1).get<double>();
      }
      joint.velocityLimit = j.value("velocity_limit", joint.velocityLimit);
      joint.reference = j.value("reference", 0.0);
      tree.joints.push_back(joint);
    }
    for (const auto& m : doc.value("markers", json::array())) {
      Marker marker;
      marker.name = m.at("name").get<std::string>();
      marker.body = tree.bodyIndex(m.at("body").get<std::string>());
      if (m.contains("offset")) marker.offset = readVec3(m["offset"], "marker '" + marker.name + "' offset");
      marker.fixed = m.value("fixed", false);
      tree.markers.push_back(marker);
    }
    for (const auto& e : doc.value("end_effectors", json::array())) {
      tree.endEffectors.push_back(tree.bodyIndex(e.get<std::string>()));
    }
    if (doc.contains("symmetry")) {
      const auto& s = doc["symmetry"];
      if (s.contains("lateral")) tree.symmetry.lateral = parseSymmetry(s["lateral"], tree, 1);
      if (s.contains("longitudinal")) tree.symmetry.longitudinal = parseSymmetry(s["longitudinal"], tree, 0);
    }
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("tree: ") + e.what());
  }
  tree.finalize();
  return tree;
}

KinematicTree loadTree(const std::string& path) {
  std::ifstream in(path);
  throwIf(!in, "tree: cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput("tree: " + path + ": " + e.what());
  }
  return parseTree(doc);
}

json treeToJson(const KinematicTree& tree) {
  auto vec = [](const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); };
  json doc;
  doc["format"] = "tree/1";
  doc["name"] = tree.name;
  doc["bodies"] = json::array();
  for (const auto& b : tree.bodies) {
    json jb;
    jb["name"] = b.name;
    jb["parent"] = b.parent < 0 ? json(nullptr) : json(tree.bodies[b.parent].name);
    jb["pos"] = vec(b.offset.position);
    const auto& q = b.offset.orientation;
    jb["quat"] = {q.w, q.x, q.y, q.z};
    doc["bodies"].push_back(jb);
  }
  doc["joints"] = json::array();
  for (const auto& j : tree.joints) {
    doc["joints"].push_back({
        {"name", j.name},
        {"type", "hinge"},
        {"body", tree.bodies[j.body].name},
        {"axis", vec(j.axis)},
        {"range", {j.lower, j.upper}},
        {"velocity_limit", j.velocityLimit},
        {"reference", j.reference},
    });
  }
  doc["markers"] = json::array();
  for (const auto& m : tree.markers) {
    doc["markers"].push_back({
        {"name", m.name},
        {"body", tree.bodies[m.body].name},
        {"offset", vec(m.offset)},
        {"fixed", m.fixed},
    });
  }
  doc["end_effectors"] = json::array();
  for (int e : tree.endEffectors) doc["end_effectors"].push_back(tree.bodies[e].name);
  if (tree.symmetry.lateral || tree.symmetry.longitudinal) {
    json s;
    if (tree.symmetry.lateral) s["lateral"] = symmetryToJson(tree, *tree.symmetry.lateral);
    if (tree.symmetry.longitudinal) s["longitudinal"] = symmetryToJson(tree, *tree.symmetry.longitudinal);
    doc["symmetry"] = s;
  }
  return doc;
}

void saveTree(const KinematicTree& tree, const std::string& path) {
  std::ofstream out(path);
  throwIf(!out, "tree: cannot write '" + path + "'");
  out << treeToJson(tree).dump(2) << '\n';
}

KinematicTree makePlanarChain(int links, double linkLength) {
  throwIf(links < 1, "makePlanarChain: need at least one link");
  KinematicTree tree;
  tree.name = "chain" + std::to_string(links);
  tree.bodies.push_back({"base", -1, Transform::identity()});
  for (int i = 0; i < links; ++i) {
    Body body;
    body.name = "link" + std::to_string(i + 1);
    body.parent = i;
    body.offset.position = i == 0 ? Vec3(0.1, 0.0, 0.0) : Vec3(linkLength, 0.0, 0.0);
    tree.bodies.push_back(body);
    HingeJoint joint;
    joint.name = "joint" + std::to_string(i + 1);
    joint.body = i + 1;
    joint.axis = Vec3::UnitY();
    joint.lower = -2.5;
    joint.upper = 2.5;
    joint.velocityLimit = 8.0;
    tree.joints.push_back(joint);
  }
  tree.markers.push_back({"base_a", 0, Vec3(0.0, 0.0, 0.05), true});
  tree.markers.push_back({"base_b", 0, Vec3(0.1, 0.0, -0.05), true});
  tree.markers.push_back({"base_c", 0, Vec3(-0.05, 0.0, 0.0), true});
  for (int i = 0; i < links; ++i) {
    const std::string n = std::to_string(i + 1);
    tree.markers.push_back({"mid" + n, i + 1, Vec3(0.5 * linkLength, 0.0, 0.0), true});
    tree.markers.push_back({"tip" + n, i + 1, Vec3(linkLength, 0.0, 0.0), false});
  }
  tree.endEffectors.push_back(links);
  Symmetry lateral;
  lateral.axis = 1;
  for (size_t b = 0; b < tree.bodies.size(); ++b) lateral.bodies.push_back(static_cast<int>(b));
  for (size_t j = 0; j < tree.joints.size(); ++j) lateral.joints.push_back(static_cast<int>(j));
  lateral.jointSigns.assign(tree.joints.size(), 1.0);
  for (size_t m = 0; m < tree.markers.size(); ++m) lateral.markers.push_back(static_cast<int>(m));
  tree.symmetry.lateral = lateral;
  tree.finalize();
  return tree;
}

}  // namespace skillforge
