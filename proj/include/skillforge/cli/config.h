#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "skillforge/actuator/actuator_net.h"
#include "skillforge/common/csv.h"
#include "skillforge/common/error.h"
#include "skillforge/domainrand/randomization.h"
#include "skillforge/domainrand/terrain.h"
#include "skillforge/envtoy/imitation.h"
#include "skillforge/mocap/clip_ops.h"
#include "skillforge/rewards/imitation.h"
#include "skillforge/rewards/tasks.h"

namespace skillforge::cli {

struct Issue {
  std::string file;
  int line = 0;       // 0 when the problem has no source position
  std::string field;  // dotted path, e.g. imitation_reward.trunc_scale
  std::string message;

  std::string format() const;
};

struct ValidationReport {
  std::vector<Issue> issues;

  bool ok() const {
    return issues.empty();
  }
  void add(std::string file, int line, std::string field, std::string message);
  // One issue per line.
  std::string format() const;
};

struct RetargetSettings {
  double beta = 0.01;
  int outerIterations = 20;
};

struct WalkingSettings {
  WalkingTask task;
  Vec3 commandRange = Vec3(1.5, 0.4, 1.2);
  Vec3 nonzeroProbability = Vec3(0.9, 0.25, 0.5);
  double switchGap = 5.0;  // s
};

struct DribblingSettings {
  DribblingTask task;
  double switchGap = 10.0;  // s
};

struct ActuatorSettings {
  PidConfig pid;
  DriveParams drive;
  CommandSchedule commands;
  ActuatorNetSpec net;
  ActuatorTrainConfig train;
  int actuators = 12;
};

struct ImitationSettings {
  ImitationTrainConfig train;
  ChainWalkerConfig env;
};

struct PipelineSettings {
  std::string data;     // directory of reference clips carrying markers
  std::string markers;  // correspondence file
  std::string preset;   // robot preset supplying rewards and randomization
  double interpolateRate = 30.0;
  FilterOptions filter;
  double chunkLength = 10.0;  // s
  int terrainCount = 4;
  int priorSteps = 1000;
  int rolloutSteps = 100;
};

// Every section is optional; commands demand the ones they use. Relative
// paths are resolved against the file's directory.
struct Config {
  std::string path;
  std::optional<uint64_t> seed;
  std::string robot;
  std::string tree;
  std::optional<double> controlRate;

  std::optional<RetargetSettings> retarget;
  std::optional<ImitationRewardConfig> imitationReward;
  std::optional<WalkingSettings> walking;
  std::optional<DribblingSettings> dribbling;
  std::optional<NoiseDelaySpec> noise;
  std::optional<RandomizationSpec> modelRandomization;
  std::optional<RandomizationSpec> ballRandomization;
  std::optional<PerturbationProcess> imitationPerturbation;
  std::optional<PerturbationProcess> reusePerturbation;
  std::optional<Ar1Prior> prior;
  std::optional<KlSchedule> klSchedule;
  std::optional<ActuatorSettings> actuator;
  std::optional<TerrainSpec> terrain;
  std::optional<ImitationSettings> imitation;
  std::optional<PipelineSettings> pipeline;
};

// Parses and checks one file, appending every problem to `report`. Fields
// that fail to parse keep their defaults so later checks still run.
Config parseConfig(const std::string& path, ValidationReport& report);

// parseConfig plus checks of referenced files (tree, preset, data, markers),
// following presets recursively.
ValidationReport validateConfigFile(const std::string& path);

// Throws InvalidInput carrying the formatted report when anything is wrong.
Config loadConfig(const std::string& path);

// Throws InvalidInput naming the missing section.
template <typename T>
const T& require(const std::optional<T>& section, const Config& config, const char* name) {
  throwIf(!section.has_value(), config.path + ": missing section [" + name + "]");
  return *section;
}

// Seed precedence: explicit flag, then SKILLFORGE_SEED, then the config, then 1.
uint64_t resolveSeed(std::optional<uint64_t> flag, std::optional<uint64_t> config);

}  // namespace skillforge::cli
