#include "skillforge/retarget/retarget.h"

#include <cmath>
#include <fstream>
#include <limits>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "skillforge/common/csv.h"
#include "skillforge/common/error.h"

namespace skillforge {

namespace {

bool observed(const Vec3& p) {
  return p.allFinite();
}

double costAt(
    const KinematicTree& tree,
    std::span<const Vec3> offsets,
    std::span<const Vec3> targets,
    const Pose& pose,
    double beta,
    const Eigen::VectorXd& qRef,
    double* residualOut = nullptr) {
  const auto fk = forwardKinematics(tree, pose, offsets);
  double residual = 0.0;
  for (size_t m = 0; m < targets.size(); ++m) {
    if (observed(targets[m])) {
      residual += (fk.markers[m] - targets[m]).squaredNorm();
    }
  }
  if (residualOut) *residualOut = residual;
  return residual + beta * (pose.q - qRef).squaredNorm();
}

Pose applyStep(const KinematicTree& tree, const Pose& pose, const Eigen::VectorXd& delta) {
  Pose next = pose;
  next.root.position += delta.head<3>();
  next.root.orientation = Quaternion::fromRotationVector(delta.segment<3>(3)) * pose.root.orientation;
  next.q += delta.tail(static_cast<Eigen::Index>(tree.jointCount()));
  next.q = next.q.cwiseMax(tree.lowerLimits()).cwiseMin(tree.upperLimits());
  return next;
}

}  // namespace

IkResult solveFrameIk(
    const KinematicTree& tree,
    std::span<const Vec3> markerOffsets,
    std::span<const Vec3> targets,
    const Pose& init,
    double beta,
    const Eigen::VectorXd& qRef,
    const IkOptions& options) {
  const auto nq = static_cast<Eigen::Index>(tree.jointCount());
  throwIf(targets.size() != tree.markers.size(), "ik: need one target per tree marker");
  throwIf(markerOffsets.size() != tree.markers.size(), "ik: need one offset per tree marker");
  throwIf(init.q.size() != nq || qRef.size() != nq, "ik: joint vector size does not match the tree");
  throwIf(!(beta >= 0.0) || !std::isfinite(beta), "ik: beta must be finite and >= 0");
  throwIf(!init.q.allFinite() || !init.root.position.allFinite() || !qRef.allFinite(), "ik: non-finite initial pose");
  for (const auto& t : targets) {
    throwIf(t.array().isInf().any(), "ik: infinite marker target");
  }
  for (const auto& o : markerOffsets) throwIf(!o.allFinite(), "ik: non-finite marker offset");

  std::vector<int> active;
  for (size_t m = 0; m < targets.size(); ++m) {
    if (observed(targets[m])) active.push_back(static_cast<int>(m));
  }

  IkResult result;
  result.pose = init;
  result.pose.q = init.q.cwiseMax(tree.lowerLimits()).cwiseMin(tree.upperLimits());
  double cost = costAt(tree, markerOffsets, targets, result.pose, beta, qRef);
  double lambda = options.initialDamping;

  for (result.iterations = 0; result.iterations < options.maxIterations && !result.converged;) {
    ++result.iterations;
    const Eigen::MatrixXd jac = markerJacobianWithRoot(tree, result.pose, active, markerOffsets);
    const auto fk = forwardKinematics(tree, result.pose, markerOffsets);
    Eigen::VectorXd r(3 * active.size());
    for (size_t i = 0; i < active.size(); ++i) {
      r.segment<3>(3 * i) = fk.markers[active[i]] - targets[active[i]];
    }
    Eigen::MatrixXd h = jac.transpose() * jac;
    Eigen::VectorXd g = jac.transpose() * r;
    h.bottomRightCorner(nq, nq).diagonal().array() += beta;
    g.tail(nq) += beta * (result.pose.q - qRef);

    while (true) {
      Eigen::MatrixXd damped = h;
      damped.diagonal().array() += lambda;
      const Eigen::VectorXd delta = -damped.ldlt().solve(g);
      const Pose candidate = applyStep(tree, result.pose, delta);
      Eigen::VectorXd taken = delta;
      taken.tail(nq) = candidate.q - result.pose.q;
      if (!taken.allFinite() || taken.norm() < options.stepTolerance) {
        result.converged = taken.allFinite();
        break;
      }
      const double next = costAt(tree, markerOffsets, targets, candidate, beta, qRef);
      if (next < cost) {
        result.pose = candidate;
        cost = next;
        lambda = std::max(lambda / 10.0, 1e-15);
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e15) {
        // no descent direction left at this precision
        result.converged = true;
        break;
      }
    }
  }
  result.cost = costAt(tree, markerOffsets, targets, result.pose, beta, qRef, &result.residual);
  return result;
}

namespace {

// One element of the reflection group generated by the symmetry maps.
struct GroupElement {
  std::vector<int> markers;
  Vec3 sign = Vec3::Ones();
};

std::vector<GroupElement> symmetryGroup(const KinematicTree& tree) {
  const size_t nm = tree.markers.size();
  GroupElement id;
  for (size_t m = 0; m < nm; ++m) id.markers.push_back(static_cast<int>(m));
  std::vector<GroupElement> group = {id};
  auto fromSymmetry = [&](const Symmetry& s) {
    GroupElement g;
    g.markers = s.markers;
    g.sign[s.axis] = -1.0;
    return g;
  };
  std::vector<GroupElement> generators;
  if (tree.symmetry.lateral) generators.push_back(fromSymmetry(*tree.symmetry.lateral));
  if (tree.symmetry.longitudinal) generators.push_back(fromSymmetry(*tree.symmetry.longitudinal));
  for (const auto& g : generators) group.push_back(g);
  if (generators.size() == 2) {
    GroupElement both;
    for (size_t m = 0; m < nm; ++m) both.markers.push_back(generators[0].markers[generators[1].markers[m]]);
    both.sign = generators[0].sign.cwiseProduct(generators[1].sign);
    group.push_back(both);
  }
  return group;
}

// Marker orbit: a representative, each member with the reflection taking
// the representative's offset to the member's, and the free components.
struct Orbit {
  int representative = 0;
  std::vector<std::pair<int, Vec3>> members;
  Eigen::MatrixXd basis;  // 3 x k
  bool fixed = false;
};

std::vector<Orbit> markerOrbits(const KinematicTree& tree) {
  const auto group = symmetryGroup(tree);
  std::vector<bool> seen(tree.markers.size(), false);
  std::vector<Orbit> orbits;
  for (size_t m0 = 0; m0 < tree.markers.size(); ++m0) {
    if (seen[m0]) continue;
    Orbit orbit;
    orbit.representative = static_cast<int>(m0);
    Vec3 free = Vec3::Ones();
    for (const auto& g : group) {
      const int m = g.markers[m0];
      if (m == static_cast<int>(m0)) {
        for (int a = 0; a < 3; ++a) {
          if (g.sign[a] < 0.0) free[a] = 0.0;
        }
      }
      if (!seen[m]) {
        seen[m] = true;
        orbit.members.emplace_back(m, g.sign);
        orbit.fixed = orbit.fixed || tree.markers[m].fixed;
      }
    }
    const int k = static_cast<int>(free.sum());
    orbit.basis = Eigen::MatrixXd::Zero(3, k);
    for (int a = 0, c = 0; a < 3; ++a) {
      if (free[a] > 0.0) orbit.basis(a, c++) = 1.0;
    }
    orbits.push_back(std::move(orbit));
  }
  return orbits;
}

}  // namespace

std::vector<Vec3> symmetrizeOffsets(const KinematicTree& tree, std::span<const Vec3> offsets) {
  throwIf(offsets.size() != tree.markers.size(), "markers: offset count does not match the tree");
  std::vector<Vec3> out(offsets.begin(), offsets.end());
  for (const auto& orbit : markerOrbits(tree)) {
    Vec3 mean = Vec3::Zero();
    for (const auto& [m, sign] : orbit.members) mean += sign.cwiseProduct(offsets[m]);
    mean /= static_cast<double>(orbit.members.size());
    const Vec3 projected = orbit.basis * (orbit.basis.transpose() * mean);
    for (const auto& [m, sign] : orbit.members) out[m] = sign.cwiseProduct(projected);
  }
  return out;
}

MarkerFit optimizeMarkers(
    const KinematicTree& tree,
    std::span<const Pose> poses,
    std::span<const std::vector<Vec3>> targets,
    std::span<const Vec3> initial) {
  throwIf(poses.size() != targets.size(), "markers: pose and target frame counts differ");
  const auto start = symmetrizeOffsets(tree, initial);
  MarkerFit fit;
  fit.offsets = start;
  fit.unobservable.assign(tree.markers.size(), false);

  std::vector<std::vector<Transform>> bodies;
  bodies.reserve(poses.size());
  for (const auto& pose : poses) bodies.push_back(forwardKinematics(tree, pose, start).bodies);

  for (const auto& orbit : markerOrbits(tree)) {
    if (orbit.fixed) {
      for (const auto& [m, sign] : orbit.members) fit.offsets[m] = initial[m];
      continue;
    }
    const Eigen::Index k = orbit.basis.cols();
    if (k == 0) continue;
    std::vector<Eigen::Matrix<double, 3, Eigen::Dynamic>> blocks;
    std::vector<Vec3> rhs;
    for (size_t t = 0; t < poses.size(); ++t) {
      throwIf(targets[t].size() != tree.markers.size(), "markers: need one target per tree marker");
      for (const auto& [m, sign] : orbit.members) {
        const Vec3& p = targets[t][m];
        if (!observed(p)) continue;
        const Transform& body = bodies[t][tree.markers[m].body];
        blocks.push_back(body.orientation.toMatrix() * sign.asDiagonal() * orbit.basis);
        rhs.push_back(p - body.position);
      }
    }
    Eigen::MatrixXd a(3 * blocks.size(), k);
    Eigen::VectorXd b(3 * blocks.size());
    for (size_t i = 0; i < blocks.size(); ++i) {
      a.middleRows<3>(3 * i) = blocks[i];
      b.segment<3>(3 * i) = rhs[i];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-10);
    if (blocks.empty() || qr.rank() < k) {
      for (const auto& [m, sign] : orbit.members) fit.unobservable[m] = true;
      continue;
    }
    const Vec3 theta = orbit.basis * qr.solve(b);
    for (const auto& [m, sign] : orbit.members) fit.offsets[m] = sign.cwiseProduct(theta);
  }
  return fit;
}

MarkerCorrespondence identityCorrespondence(const KinematicTree& tree) {
  MarkerCorrespondence c;
  for (size_t m = 0; m < tree.markers.size(); ++m) c.referenceIndex.push_back(static_cast<int>(m));
  return c;
}

MarkerCorrespondence loadCorrespondence(const std::string& path, const KinematicTree& tree) {
  std::ifstream in(path);
  throwIf(!in, "markers: cannot open '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput("markers: " + path + ": " + e.what());
  }
  throwIf(doc.value("format", std::string()) != "markers/1", path + ": expected format \"markers/1\"");
  MarkerCorrespondence c;
  c.referenceIndex.assign(tree.markers.size(), -1);
  const auto& pairs = doc.value("pairs", nlohmann::json::array());
  for (size_t i = 0; i < pairs.size(); ++i) {
    const std::string at = path + ": pairs[" + std::to_string(i) + "]";
    throwIf(!pairs[i].contains("robot") || !pairs[i].contains("reference"), at + " needs 'robot' and 'reference'");
    const int m = tree.markerIndex(pairs[i]["robot"].get<std::string>());
    throwIf(c.referenceIndex[m] != -1, at + " maps robot marker '" + tree.markers[m].name + "' twice");
    c.referenceIndex[m] = pairs[i]["reference"].get<int>();
  }
  for (size_t m = 0; m < tree.markers.size(); ++m) {
    throwIf(c.referenceIndex[m] < 0, path + ": robot marker '" + tree.markers[m].name + "' has no reference");
  }
  return c;
}

namespace {

struct Prepared {
  std::vector<std::vector<Vec3>> targets;
  Eigen::VectorXd qRef;
};

Prepared prepare(const RetargetProblem& p) {
  const auto& tree = p.tree;
  throwIf(p.reference.frames.empty(), "retarget: reference clip is empty");
  throwIf(!(p.beta >= 0.0), "retarget: beta must be >= 0");
  const size_t nref = p.reference.frames.front().markers.size();
  throwIf(nref == 0, "retarget: reference clip carries no marker positions");
  throwIf(
      p.correspondence.referenceIndex.size() != tree.markers.size(),
      "retarget: correspondence must cover every robot marker");
  throwIf(
      nref != tree.markers.size(),
      "retarget: reference has " + std::to_string(nref) + " markers, robot has " +
          std::to_string(tree.markers.size()) + "; the correspondence must be a bijection");
  std::vector<bool> used(nref, false);
  for (int r : p.correspondence.referenceIndex) {
    throwIf(r < 0 || static_cast<size_t>(r) >= nref, "retarget: correspondence index out of range");
    throwIf(used[r], "retarget: reference marker " + std::to_string(r) + " is paired twice");
    used[r] = true;
  }
  Prepared out;
  out.qRef = p.qRef.size() == 0 ? tree.referencePose() : p.qRef;
  throwIf(static_cast<size_t>(out.qRef.size()) != tree.jointCount(), "retarget: q_ref size does not match the tree");
  for (size_t t = 0; t < p.reference.frames.size(); ++t) {
    const auto& frame = p.reference.frames[t];
    throwIf(frame.markers.size() != nref, "retarget: frame " + std::to_string(t) + " marker count differs");
    std::vector<Vec3> row(tree.markers.size());
    for (size_t m = 0; m < row.size(); ++m) row[m] = frame.markers[p.correspondence.referenceIndex[m]];
    out.targets.push_back(std::move(row));
  }
  return out;
}

// Reference pose placed so the marker centroids coincide.
Pose initialPose(const KinematicTree& tree, std::span<const Vec3> offsets, std::span<const Vec3> targets, const Eigen::VectorXd& qRef) {
  Pose pose{Transform::identity(), qRef};
  const auto fk = forwardKinematics(tree, pose, offsets);
  Vec3 shift = Vec3::Zero();
  int count = 0;
  for (size_t m = 0; m < targets.size(); ++m) {
    if (observed(targets[m])) {
      shift += targets[m] - fk.markers[m];
      ++count;
    }
  }
  if (count > 0) pose.root.position = shift / count;
  return pose;
}

struct Pass {
  std::vector<IkResult> frames;
  double objective = 0.0;
};

Pass ikPass(
    const RetargetProblem& p,
    const Prepared& prep,
    std::span<const Vec3> offsets,
    const Pass* previous) {
  Pass pass;
  for (size_t t = 0; t < prep.targets.size(); ++t) {
    Pose init;
    if (t > 0) {
      init = pass.frames.back().pose;
    } else if (previous) {
      init = previous->frames[0].pose;
    } else {
      init = initialPose(p.tree, offsets, prep.targets[0], prep.qRef);
    }
    IkResult r = solveFrameIk(p.tree, offsets, prep.targets[t], init, p.beta, prep.qRef, p.ik);
    if (previous) {
      // the warm start may land in a worse basin; never fall below last alternation
      const Pose& last = previous->frames[t].pose;
      const double lastCost = costAt(p.tree, offsets, prep.targets[t], last, p.beta, prep.qRef);
      if (r.cost > lastCost) {
        IkResult again = solveFrameIk(p.tree, offsets, prep.targets[t], last, p.beta, prep.qRef, p.ik);
        if (again.cost < r.cost) r = again;
      }
    }
    pass.objective += r.cost;
    pass.frames.push_back(std::move(r));
  }
  return pass;
}

double objectiveAt(const RetargetProblem& p, const Prepared& prep, std::span<const Vec3> offsets, const Pass& pass) {
  double total = 0.0;
  for (size_t t = 0; t < pass.frames.size(); ++t) {
    total += costAt(p.tree, offsets, prep.targets[t], pass.frames[t].pose, p.beta, prep.qRef);
  }
  return total;
}

}  // namespace

RetargetResult retargetClip(const RetargetProblem& problem, int outerIterations) {
  throwIf(outerIterations < 0, "retarget: outer iterations must be >= 0");
  const auto& tree = problem.tree;
  const Prepared prep = prepare(problem);
  std::vector<Vec3> initial = problem.initialOffsets;
  if (initial.empty()) {
    for (const auto& m : tree.markers) initial.push_back(m.offset);
  }
  std::vector<Vec3> offsets = symmetrizeOffsets(tree, initial);

  RetargetResult result;
  result.unobservableMarkers.assign(tree.markers.size(), false);
  Pass pass = ikPass(problem, prep, offsets, nullptr);
  result.objective.push_back(pass.objective);

  std::vector<Pose> poses;
  for (int k = 0; k < outerIterations; ++k) {
    poses.clear();
    for (const auto& f : pass.frames) poses.push_back(f.pose);
    const MarkerFit fit = optimizeMarkers(tree, poses, prep.targets, offsets);
    if (objectiveAt(problem, prep, fit.offsets, pass) <= pass.objective) {
      offsets = fit.offsets;
      result.unobservableMarkers = fit.unobservable;
    }
    Pass next = ikPass(problem, prep, offsets, &pass);
    const double before = result.objective.back();
    pass = std::move(next);
    result.objective.push_back(pass.objective);
    ++result.alternations;
    const double improvement = (before - pass.objective) / std::max(before, std::numeric_limits<double>::min());
    if (improvement < problem.relativeTolerance || pass.objective < 1e-20) {
      break;
    }
  }

  result.markerOffsets = offsets;
  result.clip.name = problem.reference.name;
  result.clip.rate = problem.reference.rate;
  result.clip.metadata = problem.reference.metadata;
  result.clip.metadata["retargeted_to"] = tree.name;
  for (size_t t = 0; t < pass.frames.size(); ++t) {
    const auto& r = pass.frames[t];
    const auto fk = forwardKinematics(tree, r.pose, offsets);
    result.clip.frames.push_back({r.pose.root, r.pose.q, fk.bodies, fk.markers});
    result.frameResiduals.push_back(r.residual);
    if (!r.converged) ++result.unconvergedFrames;
    if (t > 0) {
      const double jump = (r.pose.q - pass.frames[t - 1].pose.q).cwiseAbs().maxCoeff();
      if (jump > problem.discontinuityThreshold) result.discontinuities.push_back(static_cast<int>(t));
    }
  }
  return result;
}

void writeRetargetReport(const RetargetResult& result, const std::string& path) {
  std::ofstream out(path);
  throwIf(!out, "retarget: cannot write report '" + path + "'");
  out << "kind,index,value\n";
  for (size_t k = 0; k < result.objective.size(); ++k) {
    out << "objective," << k << ',' << formatDouble(result.objective[k]) << '\n';
  }
  for (size_t t = 0; t < result.frameResiduals.size(); ++t) {
    out << "residual," << t << ',' << formatDouble(result.frameResiduals[t]) << '\n';
  }
}

}  // namespace skillforge
