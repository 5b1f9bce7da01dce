#pragma once

#include <map>
#include <string>
#include <vector>

#include "skillforge/kinematics/kinematic_tree.h"

namespace skillforge {

struct MotionFrame {
  Transform root;
  Eigen::VectorXd q;
  // Optional per-body world transforms; empty when not recorded.
  std::vector<Transform> bodies;
  // Optional marker world positions (reference markers for retargeting).
  std::vector<Vec3> markers;
};

struct MotionClip {
  std::string name;
  double rate = 0.0;  // Hz
  std::vector<MotionFrame> frames;
  std::map<std::string, std::string> metadata;

  size_t frameCount() const {
    return frames.size();
  }
  // (N - 1) / rate, in seconds.
  double duration() const;

  // Throws InvalidInput unless rate > 0, >= 2 frames and consistent widths.
  void validate() const;
};

struct ClipDataset {
  std::vector<MotionClip> clips;

  // Index of the clip with the given name; throws InvalidInput when absent.
  size_t index(const std::string& name) const;
  // Throws InvalidInput on duplicate names.
  void validate() const;
};

MotionClip loadClip(const std::string& path);
void saveClip(const MotionClip& clip, const std::string& path);
MotionClip parseClip(const std::string& text, const std::string& source = "<clip>");
std::string serializeClip(const MotionClip& clip);

// One frame per row: t, root position, root quaternion (w,x,y,z), q.
void exportClipCsv(const MotionClip& clip, const std::string& path);

// Loads every *.clip file in a directory, sorted by file name.
ClipDataset loadDataset(const std::string& directory);
void saveDataset(const ClipDataset& dataset, const std::string& directory);

// Joint-space + root clip rebuilt with body transforms from forward kinematics.
MotionClip withBodyTransforms(const MotionClip& clip, const KinematicTree& tree);

}  // namespace skillforge
