#pragma once

#include <cstdint>
#include <iostream>
#include <string>

#include "skillforge/cli/config.h"

namespace skillforge::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitInvalidInput = 2,
  kExitNumerical = 3,
};

// Parses argv, runs one subcommand and maps failures to exit codes.
int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

// Runs every stage of a pipeline config into `outDir` and returns the hash of
// the resulting directory. Stage seeds are drawn in a fixed order from `seed`.
std::string runPipeline(const Config& config, const std::string& outDir, uint64_t seed, std::ostream& log);

// FNV-1a over the sorted relative paths and contents of every regular file,
// as 16 hex digits.
std::string hashDirectory(const std::string& dir);

// Per-frame imitation reward of `clip` against `reference` (same rate; the
// reference needs at least as many frames). Joint velocities are backward
// differences; currents are zero.
CsvTable rewardBreakdown(
    const KinematicTree& tree,
    const MotionClip& clip,
    const MotionClip& reference,
    const ImitationRewardConfig& config);

}  // namespace skillforge::cli
