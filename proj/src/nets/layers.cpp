#include "skillforge/nets/layers.h"

#include <Eigen/QR>
#include <cmath>
#include <fstream>
#include <map>

#include "skillforge/common/error.h"

namespace skillforge {

using json = nlohmann::json;

namespace {

Matrix uniformInit(int rows, int cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, -bound, bound);
  return m;
}

Matrix orthogonalInit(int n, Rng& rng) {
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ();
  // fix column signs so the draw is uniform over the orthogonal group
  const Eigen::VectorXd d = qr.matrixQR().diagonal();
  for (int j = 0; j < n; ++j) {
    if (d[j] < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

Parameter makeParam(const std::string& name, Matrix value) {
  Parameter p{name, std::move(value), {}};
  p.zeroGrad();
  return p;
}

void checkInput(Var x, int expected, const std::string& layer) {
  throwIf(
      x.cols() != expected,
      "layer '" + layer + "': expected " + std::to_string(expected) + " input features, got " +
          std::to_string(x.cols()));
}

void checkBatch(Var x, Eigen::Index batch, const std::string& layer) {
  throwIf(
      batch < 1 || x.rows() % batch != 0,
      "layer '" + layer + "': " + std::to_string(x.rows()) + " rows do not split into batch " + std::to_string(batch));
}

Var activate(Var x, Activation act) {
  return act == Activation::kTanh ? tanh(x) : x;
}

}  // namespace

Dense::Dense(std::string name, int in, int out, Activation act, Rng& rng) : name_(std::move(name)), act_(act) {
  throwIf(in < 1 || out < 1, "dense '" + name_ + "': sizes must be >= 1");
  weight_ = makeParam(name_ + "/weight", uniformInit(in, out, 1.0 / std::sqrt(static_cast<double>(in)), rng));
  bias_ = makeParam(name_ + "/bias", Matrix::Zero(1, out));
}

Var Dense::forward(Graph& g, Var x) {
  checkInput(x, in(), name_);
  Var y = matmul(x, g.parameter(weight_)) + broadcastRows(g.parameter(bias_), x.rows());
  return activate(y, act_);
}

LayerNorm::LayerNorm(std::string name, int features) : name_(std::move(name)) {
  throwIf(features < 1, "layernorm '" + name_ + "': size must be >= 1");
  gain_ = makeParam(name_ + "/gain", Matrix::Ones(1, features));
  shift_ = makeParam(name_ + "/shift", Matrix::Zero(1, features));
}

Var LayerNorm::forward(Graph& g, Var x) {
  checkInput(x, static_cast<int>(gain_.value.cols()), name_);
  const auto rows = x.rows();
  return layerNormRows(x) * broadcastRows(g.parameter(gain_), rows) + broadcastRows(g.parameter(shift_), rows);
}

Lstm::Lstm(std::string name, int in, int hidden, Rng& rng) : name_(std::move(name)) {
  throwIf(in < 1 || hidden < 1, "lstm '" + name_ + "': sizes must be >= 1");
  inputWeight_ = makeParam(name_ + "/input_weight", uniformInit(in, 4 * hidden, 1.0 / std::sqrt(in), rng));
  Matrix rec(hidden, 4 * hidden);
  for (int k = 0; k < 4; ++k) rec.middleCols(k * hidden, hidden) = orthogonalInit(hidden, rng);
  recurrentWeight_ = makeParam(name_ + "/recurrent_weight", rec);
  Matrix b = Matrix::Zero(1, 4 * hidden);
  b.middleCols(hidden, hidden).setOnes();  // forget gate starts open
  bias_ = makeParam(name_ + "/bias", b);
}

Var Lstm::forward(Graph& g, Var x, Eigen::Index batch, LstmState* state) {
  checkInput(x, static_cast<int>(inputWeight_.value.rows()), name_);
  checkBatch(x, batch, name_);
  const int h = hidden();
  const auto steps = x.rows() / batch;
  Var hPrev, cPrev;
  if (state && state->h.size() > 0) {
    throwIf(
        state->h.rows() != batch || state->h.cols() != h || state->c.rows() != batch || state->c.cols() != h,
        "lstm '" + name_ + "': initial state shape mismatch");
    hPrev = g.constant(state->h);
    cPrev = g.constant(state->c);
  } else {
    hPrev = g.constant(Matrix::Zero(batch, h));
    cPrev = g.constant(Matrix::Zero(batch, h));
  }
  Var pre = matmul(x, g.parameter(inputWeight_)) + broadcastRows(g.parameter(bias_), x.rows());
  Var wh = g.parameter(recurrentWeight_);
  std::vector<Var> outputs;
  outputs.reserve(steps);
  for (Eigen::Index t = 0; t < steps; ++t) {
    Var gates = sliceRows(pre, t * batch, batch) + matmul(hPrev, wh);
    Var i = sigmoid(sliceCols(gates, 0, h));
    Var f = sigmoid(sliceCols(gates, h, h));
    Var c = tanh(sliceCols(gates, 2 * h, h));
    Var o = sigmoid(sliceCols(gates, 3 * h, h));
    cPrev = f * cPrev + i * c;
    hPrev = o * tanh(cPrev);
    outputs.push_back(hPrev);
  }
  if (state) {
    state->h = hPrev.value();
    state->c = cPrev.value();
  }
  return concatRows(outputs);
}

Lstm::Bound Lstm::bind(Graph& g) {
  return {g.parameter(inputWeight_), g.parameter(recurrentWeight_), g.parameter(bias_)};
}

Lstm::StepState Lstm::zeroState(Graph& g, Eigen::Index batch) const {
  return {g.constant(Matrix::Zero(batch, hidden())), g.constant(Matrix::Zero(batch, hidden()))};
}

Lstm::StepState Lstm::step(const Bound& bound, Var x, const StepState& prev) const {
  checkInput(x, static_cast<int>(inputWeight_.value.rows()), name_);
  throwIf(prev.h.rows() != x.rows(), "lstm '" + name_ + "': state batch mismatch");
  const int h = hidden();
  Var gates = matmul(x, bound.inputWeight) + matmul(prev.h, bound.recurrentWeight) +
              broadcastRows(bound.bias, x.rows());
  Var i = sigmoid(sliceCols(gates, 0, h));
  Var f = sigmoid(sliceCols(gates, h, h));
  Var c = tanh(sliceCols(gates, 2 * h, h));
  Var o = sigmoid(sliceCols(gates, 3 * h, h));
  Var cNext = f * prev.c + i * c;
  return {o * tanh(cNext), cNext};
}

Conv1dDilated::Conv1dDilated(std::string name, int in, int out, int kernel, int dilation, Activation act, Rng& rng)
    : name_(std::move(name)), dilation_(dilation), act_(act) {
  throwIf(in < 1 || out < 1, "conv '" + name_ + "': sizes must be >= 1");
  throwIf(kernel < 1 || dilation < 1, "conv '" + name_ + "': kernel and dilation must be >= 1");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in * kernel));
  for (int k = 0; k < kernel; ++k) {
    taps_.push_back(makeParam(name_ + "/tap" + std::to_string(k), uniformInit(in, out, bound, rng)));
  }
  bias_ = makeParam(name_ + "/bias", Matrix::Zero(1, out));
}

Var Conv1dDilated::forward(Graph& g, Var x, Eigen::Index batch) {
  checkInput(x, static_cast<int>(taps_.front().value.rows()), name_);
  checkBatch(x, batch, name_);
  Var y = broadcastRows(g.parameter(bias_), x.rows());
  for (size_t k = 0; k < taps_.size(); ++k) {
    const Var shifted = k == 0 ? x : shiftRows(x, static_cast<Eigen::Index>(k) * dilation_ * batch);
    y = y + matmul(shifted, g.parameter(taps_[k]));
  }
  return activate(y, act_);
}

Conv1dDilated::Bound Conv1dDilated::bind(Graph& g) {
  Bound b;
  for (auto& t : taps_) b.taps.push_back(g.parameter(t));
  b.bias = g.parameter(bias_);
  return b;
}

Var Conv1dDilated::forwardStep(const Bound& bound, const std::vector<Var>& history) const {
  throwIf(history.empty(), "conv '" + name_ + "': empty history");
  const Var& newest = history.back();
  checkInput(newest, static_cast<int>(taps_.front().value.rows()), name_);
  Var y = broadcastRows(bound.bias, newest.rows());
  const auto last = static_cast<Eigen::Index>(history.size()) - 1;
  for (size_t k = 0; k < bound.taps.size(); ++k) {
    const auto at = last - static_cast<Eigen::Index>(k) * dilation_;
    if (at < 0) break;
    y = y + matmul(history[at], bound.taps[k]);
  }
  return activate(y, act_);
}

std::vector<Parameter*> Conv1dDilated::parameters() {
  std::vector<Parameter*> out;
  for (auto& t : taps_) out.push_back(&t);
  out.push_back(&bias_);
  return out;
}

int stackReceptiveField(const std::vector<Conv1dDilated>& layers) {
  int field = 1;
  for (const auto& l : layers) field += l.receptiveField() - 1;
  return field;
}

InputNormalizer::InputNormalizer(std::string name, int in, int out, Rng& rng)
    : linear_(name + "/linear", in, out, Activation::kLinear, rng), norm_(name + "/norm", out) {}

Var InputNormalizer::forward(Graph& g, Var x) {
  return tanh(norm_.forward(g, linear_.forward(g, x)));
}

std::vector<Parameter*> InputNormalizer::parameters() {
  auto out = linear_.parameters();
  for (auto* p : norm_.parameters()) out.push_back(p);
  return out;
}

void zeroGrads(const std::vector<Parameter*>& params) {
  for (auto* p : params) p->zeroGrad();
}

void setZero(const std::vector<Parameter*>& params) {
  for (auto* p : params) p->value.setZero();
}

Adam::Adam(std::vector<Parameter*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  throwIf(!(lr > 0.0), "adam: learning rate must be > 0");
  throwIf(!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0), "adam: betas must lie in [0, 1)");
  for (auto* p : params_) {
    first_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    second_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++count_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(count_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(count_));
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    if (p.grad.size() == 0) p.zeroGrad();
    throwIf(
        p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols(),
        "adam: gradient shape mismatch for '" + p.name + "'");
    first_[i] = beta1_ * first_[i] + (1.0 - beta1_) * p.grad;
    second_[i] = beta2_ * second_[i] + (1.0 - beta2_) * p.grad.cwiseAbs2();
    p.value.array() -= lr_ * (first_[i].array() / c1) / ((second_[i].array() / c2).sqrt() + eps_);
  }
}

namespace {

json matrixToJson(const std::string& name, const Matrix& m) {
  std::vector<double> values(m.size());
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), m.rows(), m.cols()) = m;
  return {{"name", name}, {"shape", {m.rows(), m.cols()}}, {"values", values}};
}

Matrix matrixFromJson(const json& block) {
  const auto rows = block.at("shape").at(0).get<Eigen::Index>();
  const auto cols = block.at("shape").at(1).get<Eigen::Index>();
  const auto values = block.at("values").get<std::vector<double>>();
  throwIf(
      static_cast<Eigen::Index>(values.size()) != rows * cols,
      "checkpoint: block '" + block.value("name", "") + "' value count does not match its shape");
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, cols);
}

}  // namespace

json Adam::state() const {
  json doc;
  doc["count"] = count_;
  doc["lr"] = lr_;
  doc["first"] = json::array();
  doc["second"] = json::array();
  for (size_t i = 0; i < params_.size(); ++i) {
    doc["first"].push_back(matrixToJson(params_[i]->name, first_[i]));
    doc["second"].push_back(matrixToJson(params_[i]->name, second_[i]));
  }
  return doc;
}

void Adam::restore(const json& doc) {
  try {
    throwIf(doc.at("first").size() != params_.size(), "adam: moment count mismatch");
    count_ = doc.at("count").get<long>();
    for (size_t i = 0; i < params_.size(); ++i) {
      first_[i] = matrixFromJson(doc["first"][i]);
      second_[i] = matrixFromJson(doc["second"][i]);
    }
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("adam: ") + e.what());
  }
}

json parametersToJson(const std::vector<Parameter*>& params, uint64_t seed) {
  json doc;
  doc["format"] = "net/1";
  doc["seed"] = seed;
  doc["blocks"] = json::array();
  for (const auto* p : params) doc["blocks"].push_back(matrixToJson(p->name, p->value));
  return doc;
}

void parametersFromJson(const json& doc, const std::vector<Parameter*>& params) {
  try {
    throwIf(doc.value("format", "") != "net/1", "checkpoint: expected format 'net/1'");
    std::map<std::string, const json*> blocks;
    for (const auto& b : doc.at("blocks")) blocks[b.at("name").get<std::string>()] = &b;
    for (auto* p : params) {
      const auto it = blocks.find(p->name);
      throwIf(it == blocks.end(), "checkpoint: missing block '" + p->name + "'");
      Matrix m = matrixFromJson(*it->second);
      throwIf(
          m.rows() != p->value.rows() || m.cols() != p->value.cols(),
          "checkpoint: block '" + p->name + "' has shape " + std::to_string(m.rows()) + "x" +
              std::to_string(m.cols()) + ", expected " + std::to_string(p->value.rows()) + "x" +
              std::to_string(p->value.cols()));
      p->value = std::move(m);
    }
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("checkpoint: ") + e.what());
  }
}

void saveCheckpoint(const std::string& path, const std::vector<Parameter*>& params, uint64_t seed) {
  std::ofstream out(path);
  throwIf(!out, "checkpoint: cannot write '" + path + "'");
  out << parametersToJson(params, seed).dump() << '\n';
}

json loadCheckpoint(const std::string& path) {
  std::ifstream in(path);
  throwIf(!in, "checkpoint: cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput("checkpoint: " + path + ": " + e.what());
  }
}

}  // namespace skillforge
