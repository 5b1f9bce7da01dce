#pragma once

#include <Eigen/Core>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "skillforge/common/random.h"

namespace skillforge {

// How one randomized attribute is drawn.
//   kProduct: (1 + U(-a, a))_global * (1 + U(-b, b))_element * c
//   kOffset:  U(-a, a) per element and component
//   kSum:     U(0, a)_global + U(0, b)_element + c
//   kGlobal:  U(-a, a) + b, one value shared by all elements
enum class DrawForm { kProduct, kOffset, kSum, kGlobal };

// How the drawn value modifies the nominal model.
enum class ApplyMode { kScale, kOffset, kValue };

struct RandomizationEntry {
  std::string element;    // body, joint, geom, actuator or ball
  std::string attribute;  // e.g. mass, com, reference
  DrawForm form = DrawForm::kGlobal;
  ApplyMode apply = ApplyMode::kValue;
  double a = 0.0;
  double b = 0.0;
  double c = 1.0;
  int components = 1;  // 3 for positional offsets

  // Throws InvalidInput when the parameters leave the form's support.
  void validate() const;
};

struct RandomizationSpec {
  std::vector<RandomizationEntry> entries;

  void validate() const;
};

// Element counts the per-element entries expand to.
struct ElementCounts {
  int bodies = 1;
  int joints = 1;

  int count(const std::string& element) const;
};

struct EntryDraw {
  std::string element;
  std::string attribute;
  ApplyMode apply = ApplyMode::kValue;
  Eigen::MatrixXd values;  // elements x components
};

struct ModelVariation {
  std::vector<EntryDraw> draws;

  const EntryDraw& find(const std::string& element, const std::string& attribute) const;
};

ModelVariation sampleModelVariation(const RandomizationSpec& spec, const ElementCounts& counts, Rng& rng);
nlohmann::json variationToJson(const ModelVariation& variation);

DrawForm parseDrawForm(const std::string& name);
ApplyMode parseApplyMode(const std::string& name);
std::string toString(DrawForm form);
std::string toString(ApplyMode mode);

// Observation delay b + Exp(scale a), shared by every channel in a step, and
// additive Gaussian noise with per-component standard deviations.
struct NoiseDelaySpec {
  double delayScale = 0.0;   // a, s
  double delayOffset = 0.0;  // b, s
  std::map<std::string, Eigen::VectorXd> sigma;

  void validate() const;
};

double sampleDelay(const NoiseDelaySpec& spec, Rng& rng);

struct ObservationStream {
  Eigen::VectorXd time;                              // strictly increasing
  std::map<std::string, Eigen::MatrixXd> channels;  // samples x components
};

struct NoisyObservations {
  std::map<std::string, Eigen::MatrixXd> channels;
  Eigen::VectorXd delay;          // per step
  Eigen::VectorXi sourceIndex;    // sample read at each step
  std::vector<bool> clamped;      // delay reached past the oldest sample
};

// One output step per stream sample. Each step reads the latest sample at or
// before t - delay; reads before the first sample clamp to it and are flagged.
NoisyObservations applyObservationNoise(const ObservationStream& stream, const NoiseDelaySpec& spec, Rng& rng);

struct PerturbationProcess {
  double magnitudeScale = 5.0;  // a, N
  double durationScale = 0.5;   // b, s
  double gapScale = 2.0;        // c, s

  void validate() const;
};

struct Perturbation {
  double start = 0.0;
  double duration = 0.0;
  Eigen::Vector2d force = Eigen::Vector2d::Zero();  // horizontal, N
};

// Events never overlap: each gap starts after the previous event ends.
// Durations are cut at the horizon.
std::vector<Perturbation> samplePerturbations(const PerturbationProcess& process, double horizon, Rng& rng);

}  // namespace skillforge
