#pragma once

#include "skillforge/mocap/motion_clip.h"

namespace skillforge {

// Resamples a clip: Catmull-Rom splines for positions, joint values and
// markers; SQUAD for orientations. Frame k lands at time k / targetRate and
// the output covers [0, duration]. Clips with fewer than four frames fall
// back to linear/slerp and carry metadata "interpolation" = "linear".
MotionClip interpolateClip(const MotionClip& clip, double targetRate);

// Left-right mirror across the sagittal (x-z) plane using the tree's lateral
// symmetry map. An involution: mirror(mirror(c)) == c bit-exactly.
MotionClip mirrorClip(const MotionClip& clip, const KinematicTree& tree);

// Front-back mirror across the y-z plane using the longitudinal symmetry map.
MotionClip mirrorClipLongitudinal(const MotionClip& clip, const KinematicTree& tree);

struct FilterOptions {
  double footHeightTolerance = 0.05;  // m
  double groundHeight = 0.0;          // m
  double stationaryWindow = 2.0;      // s
  double stationaryVelocity = 0.05;   // m/s
  bool checkFeet = true;
};

// Drops frames that exceed joint position or velocity limits, frames where
// every end effector is further than the tolerance from the ground plane,
// and runs of at least `stationaryWindow` seconds with horizontal root speed
// below `stationaryVelocity`. The surviving spans become separate clips;
// spans shorter than two frames are discarded.
ClipDataset filterClips(
    const ClipDataset& dataset,
    const KinematicTree& tree,
    const FilterOptions& options = {});

// Splits clips into consecutive chunks of at most floor(maxLength * rate)
// frames. Chunks partition the source frames.
ClipDataset chunkClips(const ClipDataset& dataset, double maxLength = 10.0);

}  // namespace skillforge
