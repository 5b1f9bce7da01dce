#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "skillforge/envtoy/chain_env.h"
#include "skillforge/latent/latent.h"
#include "skillforge/nets/layers.h"

namespace skillforge {

struct ImitationNetConfig {
  int latentDim = 8;
  int encoderWidth = 128;
  int decoderWidth = 64;
  int lstmCells = 64;
  double alpha = 0.95;

  void validate() const;
};

nlohmann::json toJson(const ImitationNetConfig& config);
ImitationNetConfig netConfigFromJson(const nlohmann::json& doc);

// Encoder q(z_t | z_{t-1}, x_t) and branched recurrent decoder
// pi(a_t | o_t, z_t, h_{t-1}). Proprioception o_t is [q, last action].
class ImitationPolicy {
 public:
  ImitationPolicy(const ImitationNetConfig& config, int contextSize, const Eigen::VectorXd& referencePose, Rng& rng);

  struct Encoded {
    Var residual;  // mean minus alpha * z_{t-1}
    Var mean;
    Var var;
  };
  Encoded encode(Graph& g, Var context, Var zPrev);

  struct DecoderState {
    Lstm::StepState lstm;
  };
  DecoderState initialDecoderState(Graph& g, Eigen::Index batch) const;
  Lstm::Bound bindDecoder(Graph& g);
  Var decode(Graph& g, const Lstm::Bound& bound, DecoderState& state, Var proprio, Var z);

  std::vector<Parameter*> encoderParameters();
  std::vector<Parameter*> decoderParameters();
  std::vector<Parameter*> parameters();

  const ImitationNetConfig& config() const {
    return config_;
  }
  int contextSize() const {
    return contextSize_;
  }
  int jointCount() const {
    return static_cast<int>(referencePose_.size());
  }

  nlohmann::json encoderToJson(uint64_t seed);
  nlohmann::json decoderToJson(uint64_t seed);
  // Loads both halves; an empty encoder document leaves the encoder as built.
  static ImitationPolicy fromJson(const nlohmann::json& decoder, const nlohmann::json& encoder);

 private:
  ImitationNetConfig config_;
  int contextSize_;
  Eigen::VectorXd referencePose_;

  std::vector<InputNormalizer> encoderLayers_;
  Dense encoderMean_;
  Dense encoderVar_;

  InputNormalizer inputNorm_;
  Dense branchA1_, branchA2_;
  Lstm lstm_;
  Dense branchB1_, branchB2_;
  Dense headA_, headB_;
};

// KL(N(alpha z + residual, var) || N(alpha z, 1 - alpha^2)) summed over latent
// dimensions, one value per row.
Var arKlRows(Var residual, Var var, double alpha);

struct ImitationTrainConfig {
  ImitationNetConfig net;
  KlSchedule schedule = KlSchedule::constant(0.0);
  double scheduleStepScale = 1.0;  // environment steps per simulated step when evaluating the schedule
  int batch = 16;
  int unroll = 32;
  int iterations = 1500;
  double learningRate = 1e-3;
  double gradClip = 1.0;  // global norm, 0 disables
  int speedBins = 10;
  int excludeLast = 15;
  int epochIterations = 100;
  double terminationThreshold = 0.3;
  std::string checkpointPath;

  void validate() const;
};

struct ImitationCurvePoint {
  int iteration = 0;
  double envSteps = 0.0;
  double beta = 0.0;
  double loss = 0.0;
  double trackingMse = 0.0;  // rad^2
  double kl = 0.0;           // nats per step
};

struct ZeroShotResult {
  MotionClip trajectory;
  Eigen::VectorXd deviation;  // per step
  Eigen::MatrixXd latents;    // steps x latentDim
  double meanAbsError = 0.0;  // rad, over joints and steps
  double meanKl = 0.0;        // nats per step
  int terminatedAt = -1;      // first step with deviation above the threshold
};

struct ImitationMetrics {
  double trackingError = 0.0;  // rad, zero-shot on the training clips
  double klToPrior = 0.0;      // nats per step
  double latentAutocorrelation = 0.0;  // lag 1, mean over dimensions and clips
  int terminations = 0;
};

struct ImitationResult {
  SkillModule skill;
  ImitationMetrics metrics;
  std::vector<ImitationCurvePoint> curve;
};

ImitationResult trainImitation(
    const ClipDataset& dataset,
    const KinematicTree& tree,
    const ChainWalkerConfig& env,
    const ImitationTrainConfig& config,
    uint64_t seed);

// Evaluates a trained skill on every clip with sampled latents.
ImitationMetrics evaluateImitation(const SkillModule& skill, const ClipDataset& dataset, uint64_t seed);

// Encoder and decoder driven by the clip's reference context, root played back.
// Stops at the first step whose tracking deviation exceeds `threshold`.
ZeroShotResult rolloutZeroShot(const SkillModule& skill, const MotionClip& clip, Rng& rng, double threshold = 0.3);

enum class LatentSource { kPrior, kWhiteNoise };

struct PriorRolloutResult {
  MotionClip trajectory;
  Eigen::MatrixXd latents;  // steps x latentDim
  Eigen::MatrixXd actions;  // steps x joints
  double meanActionChange = 0.0;  // mean |a_t - a_{t-1}| over joints and steps
};

// Decoder driven by AR(1) prior samples, or by independent N(0, I) draws for comparison.
PriorRolloutResult rolloutPrior(const SkillModule& skill, int steps, Rng& rng, LatentSource source = LatentSource::kPrior);

// Rebuilds the tree and environment settings stored with a skill.
KinematicTree skillTree(const SkillModule& skill);
ChainWalkerConfig skillEnvConfig(const SkillModule& skill);

}  // namespace skillforge
