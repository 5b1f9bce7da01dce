#include "skillforge/actuator/actuator_net.h"

#include <cmath>
#include <fstream>

#include "skillforge/common/error.h"

namespace skillforge {

using json = nlohmann::json;

int ActuatorNetSpec::receptiveField() const {
  int field = 1;
  for (size_t i = 0; i < kernels.size() && i < dilations.size(); ++i) field += (kernels[i] - 1) * dilations[i];
  return field;
}

void ActuatorNetSpec::validate() const {
  throwIf(channels < 1, "actuator net: channels must be >= 1");
  throwIf(kernels.empty() || kernels.size() != dilations.size(), "actuator net: kernels and dilations must pair up");
  for (size_t i = 0; i < kernels.size(); ++i) {
    throwIf(kernels[i] < 1 || dilations[i] < 1, "actuator net: kernel sizes and dilations must be >= 1");
  }
  throwIf(
      receptiveField() != 8,
      "actuator net: receptive field is " + std::to_string(receptiveField()) + " steps, expected 8");
}

Matrix actuatorInputs(const ActuatorSequence& seq, const PidConfig& pid) {
  seq.validate();
  Matrix x(seq.size(), 4);
  for (Eigen::Index k = 0; k < seq.size(); ++k) {
    x(k, 0) = pidReferenceTorque(seq.tauBar[k], seq.eps[k], seq.qdot[k], pid);
    x(k, 1) = seq.qdot[k];
    x(k, 2) = seq.temperature[k];
    x(k, 3) = seq.voltage[k];
  }
  return x;
}

Matrix actuatorTargets(const ActuatorSequence& seq) {
  Matrix y(seq.size(), 2);
  y.col(0) = seq.tau;
  y.col(1) = seq.current;
  return y;
}

ActuatorNormalization fitNormalization(const ActuatorDataset& data, const PidConfig& pid) {
  data.validate();
  Eigen::Vector4d sum = Eigen::Vector4d::Zero(), sumSq = Eigen::Vector4d::Zero();
  Eigen::Vector2d outSum = Eigen::Vector2d::Zero(), outSumSq = Eigen::Vector2d::Zero();
  Eigen::Vector2d stepSq = Eigen::Vector2d::Zero();
  double count = 0.0;
  for (int i : data.train) {
    const Matrix x = actuatorInputs(data.sequences[i], pid);
    const Matrix y = actuatorTargets(data.sequences[i]);
    sum += x.colwise().sum().transpose();
    sumSq += x.array().square().colwise().sum().matrix().transpose();
    outSum += y.colwise().sum().transpose();
    outSumSq += y.array().square().colwise().sum().matrix().transpose();
    if (y.rows() > 1) {
      const Matrix dy = y.bottomRows(y.rows() - 1) - y.topRows(y.rows() - 1);
      stepSq += dy.array().square().colwise().sum().matrix().transpose();
    }
    count += static_cast<double>(x.rows());
  }
  ActuatorNormalization n;
  n.inputMean = sum / count;
  for (int c = 0; c < 4; ++c) {
    const double var = sumSq[c] / count - n.inputMean[c] * n.inputMean[c];
    // constant channels (temperature, voltage in the oracle) keep unit scale
    n.inputScale[c] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  n.outputMean = outSum / count;
  for (int c = 0; c < 2; ++c) {
    const double var = outSumSq[c] / count - n.outputMean[c] * n.outputMean[c];
    n.outputScale[c] = var > 1e-12 ? std::sqrt(var) : 1.0;
    const double step = std::sqrt(stepSq[c] / count);
    n.stepScale[c] = step > 1e-12 ? step : 1.0;
  }
  return n;
}

ActuatorNet::ActuatorNet(const ActuatorNetSpec& spec, Rng& rng) : spec_(spec) {
  spec_.validate();
  const int n = static_cast<int>(spec_.kernels.size());
  for (int i = 0; i < n; ++i) {
    const bool last = i == n - 1;
    layers_.emplace_back(
        "conv" + std::to_string(i),
        i == 0 ? 6 : spec_.channels,
        last ? 2 : spec_.channels,
        spec_.kernels[i],
        spec_.dilations[i],
        last ? Activation::kLinear : Activation::kTanh,
        rng);
  }
}

std::vector<Parameter*> ActuatorNet::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_) {
    for (auto* p : l.parameters()) out.push_back(p);
  }
  return out;
}

std::vector<Var> ActuatorNet::unroll(
    Graph& g,
    ActuatorUnrollState& state,
    const std::vector<Matrix>& inputs,
    const std::vector<Matrix>& targets,
    int teacherSteps) {
  throwIf(inputs.size() != targets.size(), "actuator net: inputs and targets differ in length");
  throwIf(state.previous.cols() != 2, "actuator net: previous outputs must have 2 columns");
  const auto batch = state.previous.rows();
  std::vector<Conv1dDilated::Bound> bound;
  for (auto& l : layers_) bound.push_back(l.bind(g));
  if (state.history.empty()) state.history.resize(layers_.size());
  std::vector<std::vector<Var>> hist(layers_.size());
  for (size_t l = 0; l < layers_.size(); ++l) {
    for (const auto& m : state.history[l]) hist[l].push_back(g.constant(m));
  }
  const Eigen::RowVector4d mean = norm_.inputMean.transpose();
  const Eigen::RowVector4d invScale = norm_.inputScale.cwiseInverse().transpose();
  const Var outMean = g.constant(norm_.outputMean.transpose().replicate(batch, 1));
  const Var outInv = g.constant(norm_.outputScale.cwiseInverse().transpose().replicate(batch, 1));
  const Var stepScale = g.constant(norm_.stepScale.transpose().replicate(batch, 1));

  Var previous = g.constant(state.previous);
  std::vector<Var> predictions;
  predictions.reserve(inputs.size());
  for (size_t t = 0; t < inputs.size(); ++t) {
    throwIf(
        inputs[t].rows() != batch || inputs[t].cols() != 4 || targets[t].rows() != batch || targets[t].cols() != 2,
        "actuator net: step " + std::to_string(t) + " has the wrong shape");
    if (t > 0) {
      previous = static_cast<int>(t) < teacherSteps ? g.constant(targets[t - 1]) : predictions.back();
    }
    const Matrix x = (inputs[t].rowwise() - mean).array().rowwise() * invScale.array();
    Var h = concatCols({g.constant(x), (previous - outMean) * outInv});
    for (size_t l = 0; l < layers_.size(); ++l) {
      hist[l].push_back(h);
      const size_t keep = static_cast<size_t>(layers_[l].receptiveField());
      if (hist[l].size() > keep) hist[l].erase(hist[l].begin());
      h = layers_[l].forwardStep(bound[l], hist[l]);
    }
    predictions.push_back(previous + h * stepScale);
  }
  for (size_t l = 0; l < layers_.size(); ++l) {
    state.history[l].clear();
    for (const auto& v : hist[l]) state.history[l].push_back(v.value());
  }
  if (!inputs.empty()) {
    const auto n = static_cast<int>(inputs.size());
    state.previous = n < teacherSteps ? targets.back() : Matrix(predictions.back().value());
  }
  return predictions;
}

Eigen::Vector2d ActuatorNet::forward(const Matrix& window, const Matrix& previous, bool* warmup) {
  throwIf(window.cols() != 4 || previous.cols() != 2, "actuator net: window must be L x 4 and previous L x 2");
  throwIf(window.rows() < 1 || window.rows() != previous.rows(), "actuator net: window and previous lengths differ");
  if (warmup) *warmup = window.rows() < spec_.receptiveField();
  const auto n = window.rows();
  ActuatorUnrollState state;
  state.previous = previous.row(0);
  std::vector<Matrix> inputs, targets;
  for (Eigen::Index t = 0; t < n; ++t) {
    inputs.push_back(window.row(t));
    targets.push_back(t + 1 < n ? Matrix(previous.row(t + 1)) : Matrix(previous.row(t)));
  }
  Graph g;
  const auto preds = unroll(g, state, inputs, targets, static_cast<int>(n));
  return preds.back().value().row(0).transpose();
}

Matrix ActuatorNet::rollout(const Matrix& inputs, const Matrix& targets) {
  throwIf(inputs.rows() != targets.rows() || inputs.cols() != 4 || targets.cols() != 2, "actuator net: rollout shape mismatch");
  const auto n = inputs.rows();
  const int field = spec_.receptiveField();
  Matrix out = targets;
  if (n <= field) return out;
  ActuatorUnrollState state;
  state.previous = targets.row(0);
  // chunked so the tape stays small; the carried state makes it exact
  const Eigen::Index chunk = 256;
  bool first = true;
  for (Eigen::Index start = 1; start < n; start += chunk) {
    const auto len = std::min(chunk, n - start);
    std::vector<Matrix> in, tg;
    for (Eigen::Index k = 0; k < len; ++k) {
      in.push_back(inputs.row(start + k));
      tg.push_back(targets.row(start + k));
    }
    Graph g;
    const auto preds = unroll(g, state, in, tg, first ? field : 0);
    first = false;
    for (Eigen::Index k = 0; k < len; ++k) {
      if (start + k >= field) {
        out.row(start + k) = preds[k].value().row(0);
      }
    }
  }
  return out;
}

json ActuatorNet::toJson(uint64_t seed) {
  auto vec = [](const auto& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {
      {"format", "actuator/1"},
      {"spec", {{"channels", spec_.channels}, {"kernels", spec_.kernels}, {"dilations", spec_.dilations}}},
      {"normalization",
       {{"input_mean", vec(norm_.inputMean)},
        {"input_scale", vec(norm_.inputScale)},
        {"output_mean", vec(norm_.outputMean)},
        {"output_scale", vec(norm_.outputScale)},
        {"step_scale", vec(norm_.stepScale)}}},
      {"net", parametersToJson(parameters(), seed)},
  };
}

ActuatorNet ActuatorNet::fromJson(const json& doc) {
  try {
    throwIf(doc.value("format", "") != "actuator/1", "actuator net: expected format 'actuator/1'");
    ActuatorNetSpec spec;
    spec.channels = doc.at("spec").at("channels").get<int>();
    spec.kernels = doc.at("spec").at("kernels").get<std::vector<int>>();
    spec.dilations = doc.at("spec").at("dilations").get<std::vector<int>>();
    Rng rng(0);
    ActuatorNet net(spec, rng);
    const auto& n = doc.at("normalization");
    const auto mean = n.at("input_mean").get<std::vector<double>>();
    const auto scale = n.at("input_scale").get<std::vector<double>>();
    const auto outMean = n.at("output_mean").get<std::vector<double>>();
    const auto out = n.at("output_scale").get<std::vector<double>>();
    const auto step = n.at("step_scale").get<std::vector<double>>();
    throwIf(
        mean.size() != 4 || scale.size() != 4 || outMean.size() != 2 || out.size() != 2 || step.size() != 2,
        "actuator net: normalization sizes are wrong");
    net.norm_.inputMean = Eigen::Vector4d(mean.data());
    net.norm_.inputScale = Eigen::Vector4d(scale.data());
    net.norm_.outputMean = Eigen::Vector2d(outMean.data());
    net.norm_.outputScale = Eigen::Vector2d(out.data());
    net.norm_.stepScale = Eigen::Vector2d(step.data());
    parametersFromJson(doc.at("net"), net.parameters());
    return net;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("actuator net: ") + e.what());
  }
}

ActuatorRmse evaluateRmse(ActuatorNet& net, const ActuatorDataset& data, const std::vector<int>& split, const PidConfig& pid) {
  throwIf(split.empty(), "actuator rmse: empty split");
  const int field = net.spec().receptiveField();
  Eigen::Vector2d sq = Eigen::Vector2d::Zero();
  double count = 0.0;
  for (int i : split) {
    const auto& seq = data.sequences.at(i);
    const Matrix x = actuatorInputs(seq, pid);
    const Matrix y = actuatorTargets(seq);
    const Matrix p = net.rollout(x, y);
    if (p.rows() <= field) continue;
    const Matrix err = p.bottomRows(p.rows() - field) - y.bottomRows(y.rows() - field);
    sq += err.array().square().colwise().sum().matrix().transpose();
    count += static_cast<double>(err.rows());
  }
  throwIf(count == 0.0, "actuator rmse: sequences shorter than the receptive field");
  return {std::sqrt(sq[0] / count), std::sqrt(sq[1] / count)};
}

void ActuatorTrainConfig::validate() const {
  throwIf(batch < 1 || unroll < 1, "actuator training: batch and unroll must be >= 1");
  throwIf(!(learningRate > 0.0), "actuator training: learning rate must be > 0");
  throwIf(iterations < 0 || epochIterations < 1, "actuator training: iteration counts must be positive");
}

ActuatorTrainReport trainActuatorNet(
    ActuatorNet& net,
    const ActuatorDataset& data,
    const PidConfig& pid,
    const ActuatorTrainConfig& config) {
  config.validate();
  data.validate();
  const int field = net.spec().receptiveField();
  const int window = field + config.unroll;
  std::vector<Matrix> inputs, targets;
  for (int i : data.train) {
    inputs.push_back(actuatorInputs(data.sequences[i], pid));
    targets.push_back(actuatorTargets(data.sequences[i]));
    throwIf(
        inputs.back().rows() < window + 1,
        "actuator training: sequence '" + data.sequences[i].name + "' is shorter than the unroll window");
  }
  net.normalization() = fitNormalization(data, pid);

  ActuatorTrainReport report;
  report.initialTest = evaluateRmse(net, data, data.test, pid);
  auto params = net.parameters();
  Adam adam(params, config.learningRate);
  Rng rng(config.seed);
  const Eigen::RowVector2d outInv = net.normalization().outputScale.cwiseInverse().transpose();
  std::string lastCheckpoint;
  double epochSum = 0.0;
  for (int it = 0; it < config.iterations; ++it) {
    std::vector<Matrix> batchIn(window, Matrix(config.batch, 4));
    std::vector<Matrix> batchTarget(window, Matrix(config.batch, 2));
    ActuatorUnrollState state;
    state.previous.resize(config.batch, 2);
    for (int b = 0; b < config.batch; ++b) {
      const auto s = static_cast<size_t>(std::uniform_int_distribution<size_t>(0, inputs.size() - 1)(rng));
      const auto n = inputs[s].rows();
      const auto start = std::uniform_int_distribution<Eigen::Index>(1, n - window)(rng);
      state.previous.row(b) = targets[s].row(start - 1);
      for (int t = 0; t < window; ++t) {
        batchIn[t].row(b) = inputs[s].row(start + t);
        batchTarget[t].row(b) = targets[s].row(start + t);
      }
    }
    Graph g;
    const auto preds = net.unroll(g, state, batchIn, batchTarget, field);
    std::vector<Var> errors;
    const Var weight = g.constant(outInv.replicate(config.batch, 1));
    for (int t = field; t < window; ++t) errors.push_back((preds[t] - g.constant(batchTarget[t])) * weight);
    const Var loss = mean(square(concatRows(errors)));
    const double value = loss.value()(0, 0);
    if (!std::isfinite(value)) {
      throw NumericalFailure(
          "actuator training: loss became non-finite at iteration " + std::to_string(it), lastCheckpoint);
    }
    zeroGrads(params);
    g.backward(loss);
    adam.step();
    epochSum += value;
    if ((it + 1) % config.epochIterations == 0) {
      report.epochLoss.push_back(epochSum / config.epochIterations);
      epochSum = 0.0;
      if (!config.checkpointPath.empty()) {
        std::ofstream out(config.checkpointPath);
        throwIf(!out, "actuator training: cannot write checkpoint '" + config.checkpointPath + "'");
        out << net.toJson(config.seed).dump() << '\n';
        lastCheckpoint = config.checkpointPath;
      }
    }
  }
  report.train = evaluateRmse(net, data, data.train, pid);
  if (!data.val.empty()) report.val = evaluateRmse(net, data, data.val, pid);
  report.test = evaluateRmse(net, data, data.test, pid);
  return report;
}

}  // namespace skillforge
