#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "skillforge/common/random.h"
#include "skillforge/nets/graph.h"

namespace skillforge {

// Sequences are stored time-major: row t * batch + b holds step t of sequence b.

enum class Activation { kLinear, kTanh };

class Dense {
 public:
  Dense() = default;
  Dense(std::string name, int in, int out, Activation act, Rng& rng);

  Var forward(Graph& g, Var x);
  std::vector<Parameter*> parameters() {
    return {&weight_, &bias_};
  }
  int in() const {
    return static_cast<int>(weight_.value.rows());
  }
  int out() const {
    return static_cast<int>(weight_.value.cols());
  }
  Parameter& weight() {
    return weight_;
  }
  Parameter& bias() {
    return bias_;
  }

 private:
  std::string name_;
  Activation act_ = Activation::kLinear;
  Parameter weight_;  // in x out
  Parameter bias_;    // 1 x out
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(std::string name, int features);

  Var forward(Graph& g, Var x);
  std::vector<Parameter*> parameters() {
    return {&gain_, &shift_};
  }
  Parameter& gain() {
    return gain_;
  }
  Parameter& shift() {
    return shift_;
  }

 private:
  std::string name_;
  Parameter gain_;
  Parameter shift_;
};

struct LstmState {
  Matrix h;
  Matrix c;
};

class Lstm {
 public:
  Lstm() = default;
  Lstm(std::string name, int in, int hidden, Rng& rng);

  // Unrolls over all steps of a time-major sequence. `state` supplies the
  // initial state (zeros if empty) and receives the final one.
  Var forward(Graph& g, Var x, Eigen::Index batch, LstmState* state = nullptr);

  // Single-step interface for loops whose next input depends on the output.
  struct Bound {
    Var inputWeight;
    Var recurrentWeight;
    Var bias;
  };
  struct StepState {
    Var h;
    Var c;
  };
  Bound bind(Graph& g);
  StepState zeroState(Graph& g, Eigen::Index batch) const;
  StepState step(const Bound& bound, Var x, const StepState& prev) const;

  std::vector<Parameter*> parameters() {
    return {&inputWeight_, &recurrentWeight_, &bias_};
  }
  int hidden() const {
    return static_cast<int>(recurrentWeight_.value.rows());
  }
  Parameter& inputWeight() {
    return inputWeight_;
  }
  Parameter& recurrentWeight() {
    return recurrentWeight_;
  }
  Parameter& bias() {
    return bias_;
  }

 private:
  std::string name_;
  Parameter inputWeight_;      // in x 4H, gate order input, forget, cell, output
  Parameter recurrentWeight_;  // H x 4H
  Parameter bias_;             // 1 x 4H
};

// Causal dilated convolution along time: y_t = b + sum_k x_{t - k d} W_k.
class Conv1dDilated {
 public:
  Conv1dDilated() = default;
  Conv1dDilated(std::string name, int in, int out, int kernel, int dilation, Activation act, Rng& rng);

  Var forward(Graph& g, Var x, Eigen::Index batch);

  // Parameter nodes bound to one graph, reused across single-step calls.
  struct Bound {
    std::vector<Var> taps;
    Var bias;
  };
  Bound bind(Graph& g);
  // Output for the newest entry of `history` (one batch x in block per step,
  // oldest first). Missing older steps count as zeros.
  Var forwardStep(const Bound& bound, const std::vector<Var>& history) const;

  std::vector<Parameter*> parameters();
  int receptiveField() const {
    return (static_cast<int>(taps_.size()) - 1) * dilation_ + 1;
  }
  std::vector<Parameter>& taps() {
    return taps_;
  }
  Parameter& bias() {
    return bias_;
  }

 private:
  std::string name_;
  int dilation_ = 1;
  Activation act_ = Activation::kLinear;
  std::vector<Parameter> taps_;  // one in x out matrix per kernel tap
  Parameter bias_;
};

// Receptive field of a stack of causal convolutions.
int stackReceptiveField(const std::vector<Conv1dDilated>& layers);

// Linear layer, layer norm and tanh, used to normalize raw observations.
class InputNormalizer {
 public:
  InputNormalizer() = default;
  InputNormalizer(std::string name, int in, int out, Rng& rng);

  Var forward(Graph& g, Var x);
  std::vector<Parameter*> parameters();

 private:
  Dense linear_;
  LayerNorm norm_;
};

void zeroGrads(const std::vector<Parameter*>& params);
void setZero(const std::vector<Parameter*>& params);

class Adam {
 public:
  Adam(std::vector<Parameter*> params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  // One bias-corrected update from the accumulated gradients.
  void step();
  long count() const {
    return count_;
  }
  double learningRate() const {
    return lr_;
  }

  nlohmann::json state() const;
  void restore(const nlohmann::json& doc);

 private:
  std::vector<Parameter*> params_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long count_ = 0;
};

// Named parameter blocks in the `net/1` container.
nlohmann::json parametersToJson(const std::vector<Parameter*>& params, uint64_t seed);
// Loads values by name. Throws InvalidInput on missing blocks or shape mismatch.
void parametersFromJson(const nlohmann::json& doc, const std::vector<Parameter*>& params);
void saveCheckpoint(const std::string& path, const std::vector<Parameter*>& params, uint64_t seed);
nlohmann::json loadCheckpoint(const std::string& path);

}  // namespace skillforge
