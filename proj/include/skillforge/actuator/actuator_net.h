#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "skillforge/actuator/drive.h"
#include "skillforge/nets/layers.h"

namespace skillforge {

struct ActuatorNetSpec {
  int channels = 16;
  std::vector<int> kernels = {2, 2, 2, 1};
  std::vector<int> dilations = {1, 2, 4, 1};

  int receptiveField() const;
  // Throws InvalidInput unless the stack is well formed with a field of 8.
  void validate() const;
};

// Inputs are reference torque, joint velocity, temperature and voltage;
// outputs are torque and current.
struct ActuatorNormalization {
  Eigen::Vector4d inputMean = Eigen::Vector4d::Zero();
  Eigen::Vector4d inputScale = Eigen::Vector4d::Ones();
  // Fed-back outputs are standardized with these.
  Eigen::Vector2d outputMean = Eigen::Vector2d::Zero();
  Eigen::Vector2d outputScale = Eigen::Vector2d::Ones();
  // Scale of the residual head, the spread of one-step output changes.
  Eigen::Vector2d stepScale = Eigen::Vector2d::Ones();
};

// n x 4 raw network inputs, reference torque from the PD stage.
Matrix actuatorInputs(const ActuatorSequence& seq, const PidConfig& pid);
// n x 2 torque and current.
Matrix actuatorTargets(const ActuatorSequence& seq);

ActuatorNormalization fitNormalization(const ActuatorDataset& data, const PidConfig& pid);

// Carried between unroll calls: per-layer input history (newest last) and
// the last outputs in raw units.
struct ActuatorUnrollState {
  std::vector<std::vector<Matrix>> history;
  Matrix previous;
};

class ActuatorNet {
 public:
  explicit ActuatorNet(const ActuatorNetSpec& spec, Rng& rng);

  const ActuatorNetSpec& spec() const {
    return spec_;
  }
  ActuatorNormalization& normalization() {
    return norm_;
  }
  const ActuatorNormalization& normalization() const {
    return norm_;
  }
  std::vector<Parameter*> parameters();

  // Predicts step t from raw inputs for steps t-L+1..t and raw outputs for
  // steps t-L..t-1. Windows shorter than the receptive field are zero padded
  // and reported through `warmup`.
  Eigen::Vector2d forward(const Matrix& window, const Matrix& previous, bool* warmup = nullptr);

  // Autoregressive unroll on a batch. inputs[t] is batch x 4 raw, targets[t]
  // batch x 2 raw. `state.previous` must hold the raw outputs before step 0.
  // For t < teacherSteps the true previous output is fed back instead of the
  // prediction. Returns raw predictions for every step.
  std::vector<Var> unroll(
      Graph& g,
      ActuatorUnrollState& state,
      const std::vector<Matrix>& inputs,
      const std::vector<Matrix>& targets,
      int teacherSteps);

  // Closed-loop prediction of a whole sequence (raw units). The first
  // receptive-field steps are copied from the targets.
  Matrix rollout(const Matrix& inputs, const Matrix& targets);

  nlohmann::json toJson(uint64_t seed);
  static ActuatorNet fromJson(const nlohmann::json& doc);

 private:
  ActuatorNetSpec spec_;
  ActuatorNormalization norm_;
  std::vector<Conv1dDilated> layers_;
};

struct ActuatorRmse {
  double torque = 0.0;   // Nm
  double current = 0.0;  // A
};

ActuatorRmse evaluateRmse(ActuatorNet& net, const ActuatorDataset& data, const std::vector<int>& split, const PidConfig& pid);

struct ActuatorTrainConfig {
  int batch = 16;
  int unroll = 1600;
  double learningRate = 1e-3;
  int iterations = 800;
  int epochIterations = 50;
  uint64_t seed = 1;
  std::string checkpointPath;  // written after every finite epoch when set

  void validate() const;
};

struct ActuatorTrainReport {
  ActuatorRmse initialTest;
  ActuatorRmse train;
  ActuatorRmse val;
  ActuatorRmse test;
  std::vector<double> epochLoss;
};

// Fits normalization on the train split, then minimizes the closed-loop MSE of
// both heads with backpropagation through the unroll. Throws NumericalFailure
// carrying the last finite checkpoint if the loss diverges.
ActuatorTrainReport trainActuatorNet(
    ActuatorNet& net,
    const ActuatorDataset& data,
    const PidConfig& pid,
    const ActuatorTrainConfig& config);

}  // namespace skillforge
