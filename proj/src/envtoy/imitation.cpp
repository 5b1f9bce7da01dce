#include "skillforge/envtoy/imitation.h"

#include <cmath>
#include <fstream>
#include <limits>

#include "skillforge/common/error.h"
#include "skillforge/rewards/imitation.h"

namespace skillforge {

void ImitationNetConfig::validate() const {
  throwIf(latentDim < 1, "imitation net: latent dimension must be >= 1");
  throwIf(encoderWidth < 1 || decoderWidth < 1 || lstmCells < 1, "imitation net: layer widths must be >= 1");
  throwIf(!(alpha >= 0.0 && alpha < 1.0), "imitation net: alpha must lie in [0, 1)");
}

nlohmann::json toJson(const ImitationNetConfig& c) {
  return {{"latent_dim", c.latentDim},
          {"encoder_width", c.encoderWidth},
          {"decoder_width", c.decoderWidth},
          {"lstm_cells", c.lstmCells},
          {"alpha", c.alpha}};
}

ImitationNetConfig netConfigFromJson(const nlohmann::json& doc) {
  ImitationNetConfig c;
  c.latentDim = doc.at("latent_dim").get<int>();
  c.encoderWidth = doc.at("encoder_width").get<int>();
  c.decoderWidth = doc.at("decoder_width").get<int>();
  c.lstmCells = doc.at("lstm_cells").get<int>();
  c.alpha = doc.at("alpha").get<double>();
  c.validate();
  return c;
}

namespace {

void shrink(Dense& layer, double factor) {
  layer.weight().value *= factor;
}

Matrix rowOf(const Eigen::VectorXd& v) {
  return v.transpose();
}

}  // namespace

ImitationPolicy::ImitationPolicy(
    const ImitationNetConfig& config,
    int contextSize,
    const Eigen::VectorXd& referencePose,
    Rng& rng)
    : config_(config), contextSize_(contextSize), referencePose_(referencePose) {
  config_.validate();
  throwIf(contextSize < 1 || referencePose.size() < 1, "imitation policy: context and joint sizes must be >= 1");
  const int d = config_.latentDim;
  const int we = config_.encoderWidth;
  const int wd = config_.decoderWidth;
  const int h = config_.lstmCells;
  const int n = static_cast<int>(referencePose.size());

  encoderLayers_.emplace_back("encoder/layer0", contextSize + d, we, rng);
  encoderLayers_.emplace_back("encoder/layer1", we, we, rng);
  encoderMean_ = Dense("encoder/mean", we, d, Activation::kLinear, rng);
  encoderVar_ = Dense("encoder/var", we, d, Activation::kLinear, rng);
  shrink(encoderMean_, 0.1);
  shrink(encoderVar_, 0.1);
  // Start at the prior's innovation variance.
  encoderVar_.bias().value.setConstant(std::log(std::expm1(1.0 - config_.alpha * config_.alpha)));

  inputNorm_ = InputNormalizer("decoder/input", 2 * n, wd, rng);
  branchA1_ = Dense("decoder/a1", wd, wd, Activation::kTanh, rng);
  branchA2_ = Dense("decoder/a2", wd, wd, Activation::kTanh, rng);
  lstm_ = Lstm("decoder/lstm", wd, h, rng);
  branchB1_ = Dense("decoder/b1", h + wd + d, wd, Activation::kTanh, rng);
  branchB2_ = Dense("decoder/b2", wd, wd, Activation::kTanh, rng);
  headA_ = Dense("decoder/head_a", h, n, Activation::kLinear, rng);
  headB_ = Dense("decoder/head_b", wd, n, Activation::kLinear, rng);
  shrink(headA_, 0.1);
  shrink(headB_, 0.1);
}

ImitationPolicy::Encoded ImitationPolicy::encode(Graph& g, Var context, Var zPrev) {
  Var x = concatCols({context, zPrev});
  for (auto& layer : encoderLayers_) x = layer.forward(g, x);
  Encoded out;
  out.residual = encoderMean_.forward(g, x);
  out.mean = out.residual + config_.alpha * zPrev;
  out.var = addScalar(softplus(encoderVar_.forward(g, x)), 1e-6);
  return out;
}

ImitationPolicy::DecoderState ImitationPolicy::initialDecoderState(Graph& g, Eigen::Index batch) const {
  return {lstm_.zeroState(g, batch)};
}

Lstm::Bound ImitationPolicy::bindDecoder(Graph& g) {
  return lstm_.bind(g);
}

Var ImitationPolicy::decode(Graph& g, const Lstm::Bound& bound, DecoderState& state, Var proprio, Var z) {
  const Var norm = inputNorm_.forward(g, proprio);
  state.lstm = lstm_.step(bound, branchA2_.forward(g, branchA1_.forward(g, norm)), state.lstm);
  const Var b = branchB2_.forward(g, branchB1_.forward(g, concatCols({state.lstm.h, norm, z})));
  const Var pose = g.constant(rowOf(referencePose_).replicate(proprio.rows(), 1));
  return headA_.forward(g, state.lstm.h) + headB_.forward(g, b) + pose;
}

std::vector<Parameter*> ImitationPolicy::encoderParameters() {
  std::vector<Parameter*> out;
  for (auto& layer : encoderLayers_) {
    for (auto* p : layer.parameters()) out.push_back(p);
  }
  for (auto* p : encoderMean_.parameters()) out.push_back(p);
  for (auto* p : encoderVar_.parameters()) out.push_back(p);
  return out;
}

std::vector<Parameter*> ImitationPolicy::decoderParameters() {
  std::vector<Parameter*> out;
  for (auto* p : inputNorm_.parameters()) out.push_back(p);
  for (Dense* d : {&branchA1_, &branchA2_}) {
    for (auto* p : d->parameters()) out.push_back(p);
  }
  for (auto* p : lstm_.parameters()) out.push_back(p);
  for (Dense* d : {&branchB1_, &branchB2_, &headA_, &headB_}) {
    for (auto* p : d->parameters()) out.push_back(p);
  }
  return out;
}

std::vector<Parameter*> ImitationPolicy::parameters() {
  auto out = encoderParameters();
  for (auto* p : decoderParameters()) out.push_back(p);
  return out;
}

nlohmann::json ImitationPolicy::encoderToJson(uint64_t seed) {
  return {{"format", "encoder/1"}, {"context_size", contextSize_}, {"parameters", parametersToJson(encoderParameters(), seed)}};
}

nlohmann::json ImitationPolicy::decoderToJson(uint64_t seed) {
  return {{"format", "decoder/1"},
          {"config", toJson(config_)},
          {"context_size", contextSize_},
          {"reference_pose", std::vector<double>(referencePose_.data(), referencePose_.data() + referencePose_.size())},
          {"parameters", parametersToJson(decoderParameters(), seed)}};
}

ImitationPolicy ImitationPolicy::fromJson(const nlohmann::json& decoder, const nlohmann::json& encoder) {
  throwIf(decoder.value("format", "") != "decoder/1", "imitation policy: decoder document has wrong format");
  const auto pose = decoder.at("reference_pose").get<std::vector<double>>();
  Rng rng(0);
  ImitationPolicy policy(
      netConfigFromJson(decoder.at("config")),
      decoder.at("context_size").get<int>(),
      Eigen::Map<const Eigen::VectorXd>(pose.data(), static_cast<Eigen::Index>(pose.size())),
      rng);
  parametersFromJson(decoder.at("parameters"), policy.decoderParameters());
  if (!encoder.is_null() && !encoder.empty()) {
    throwIf(encoder.value("format", "") != "encoder/1", "imitation policy: encoder document has wrong format");
    throwIf(encoder.at("context_size").get<int>() != policy.contextSize_, "imitation policy: encoder context size differs");
    parametersFromJson(encoder.at("parameters"), policy.encoderParameters());
  }
  return policy;
}

Var arKlRows(Var residual, Var var, double alpha) {
  const double pv = 1.0 - alpha * alpha;
  const Var terms = addScalar(scale(var + square(residual), 1.0 / pv) - log(var), std::log(pv) - 1.0);
  return scale(matmul(terms, residual.graph->constant(Matrix::Ones(residual.cols(), 1))), 0.5);
}

void ImitationTrainConfig::validate() const {
  net.validate();
  schedule.validate();
  throwIf(batch < 1 || unroll < 1 || iterations < 0, "imitation training: batch and unroll must be >= 1, iterations >= 0");
  throwIf(!(learningRate > 0.0), "imitation training: learning rate must be > 0");
  throwIf(!(gradClip >= 0.0), "imitation training: gradient clip must be >= 0");
  throwIf(!(scheduleStepScale > 0.0), "imitation training: schedule step scale must be > 0");
  throwIf(speedBins < 1 || epochIterations < 1, "imitation training: speed bins and epoch length must be >= 1");
  throwIf(excludeLast < kContextFrames, "imitation training: at least the context window must be excluded from start frames");
  throwIf(!(terminationThreshold > 0.0), "imitation training: termination threshold must be > 0");
}

namespace {

Matrix gaussianNoise(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

void clipGradients(const std::vector<Parameter*>& params, double maxNorm) {
  if (maxNorm <= 0.0) return;
  double sq = 0.0;
  for (auto* p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > maxNorm) {
    for (auto* p : params) p->grad *= maxNorm / norm;
  }
}

void checkClip(const MotionClip& clip, const KinematicTree& tree, double rate) {
  clip.validate();
  throwIf(
      std::abs(clip.rate - rate) > 1e-9 * rate,
      "imitation: clip '" + clip.name + "' runs at " + std::to_string(clip.rate) + " Hz, control rate is " + std::to_string(rate));
  throwIf(clip.frames.front().q.size() != static_cast<Eigen::Index>(tree.jointCount()), "imitation: clip '" + clip.name + "' joint count differs from tree");
}

// Context and its Jacobian with respect to the joint angles (central differences).
Eigen::VectorXd contextJacobian(
    const KinematicTree& tree,
    const BodyTrack& track,
    size_t t,
    const Pose& current,
    Eigen::MatrixXd& jacobian) {
  const auto value = [&](const Eigen::VectorXd& q) {
    return referenceContext(track, t, current.root, forwardKinematics(tree, {current.root, q}).bodies);
  };
  const Eigen::VectorXd x = value(current.q);
  const double h = 1e-6;
  jacobian.resize(x.size(), current.q.size());
  Eigen::VectorXd q = current.q;
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    q[j] = current.q[j] + h;
    const Eigen::VectorXd up = value(q);
    q[j] = current.q[j] - h;
    jacobian.col(j) = (up - value(q)) / (2.0 * h);
    q[j] = current.q[j];
  }
  return x;
}

nlohmann::json envToJson(const ChainWalkerConfig& c) {
  return {{"control_rate", c.controlRate}, {"velocity_limit", c.velocityLimit}};
}

}  // namespace

KinematicTree skillTree(const SkillModule& skill) {
  throwIf(!skill.metadata.contains("tree"), "skill: no embedded tree");
  return parseTree(skill.metadata.at("tree"));
}

ChainWalkerConfig skillEnvConfig(const SkillModule& skill) {
  throwIf(!skill.metadata.contains("env"), "skill: no embedded environment settings");
  const auto& e = skill.metadata.at("env");
  ChainWalkerConfig c{e.at("control_rate").get<double>(), e.at("velocity_limit").get<double>()};
  c.validate();
  return c;
}

ZeroShotResult rolloutZeroShot(const SkillModule& skill, const MotionClip& clip, Rng& rng, double threshold) {
  throwIf(!skill.metadata.contains("encoder"), "zero-shot rollout: skill has no encoder");
  auto policy = ImitationPolicy::fromJson(skill.decoder, skill.metadata.at("encoder"));
  const KinematicTree tree = skillTree(skill);
  const ChainWalkerEnv env(tree, skillEnvConfig(skill));
  checkClip(clip, tree, env.config().controlRate);
  throwIf(contextSize(tree) != policy.contextSize(), "zero-shot rollout: context size differs from the encoder");
  throwIf(clip.frameCount() <= static_cast<size_t>(kContextFrames), "zero-shot rollout: clip '" + clip.name + "' is too short");
  const BodyTrack reference = clipBodyTransforms(tree, clip);

  const int d = policy.config().latentDim;
  const int h = policy.config().lstmCells;
  const auto steps = static_cast<Eigen::Index>(clip.frameCount()) - kContextFrames;
  ZeroShotResult out;
  out.trajectory.name = clip.name + "_rollout";
  out.trajectory.rate = clip.rate;
  out.deviation.resize(steps);
  out.latents.resize(steps, d);
  ChainState state = env.reset(clip.frames.front());
  out.trajectory.frames.push_back({state.pose.root, state.pose.q, {}, {}});
  Matrix hState = Matrix::Zero(1, h), cState = Matrix::Zero(1, h);
  Matrix zPrev = Matrix::Zero(1, d);
  double absError = 0.0, kl = 0.0;
  Eigen::Index done = 0;
  for (Eigen::Index t = 0; t < steps; ++t) {
    Graph g;
    const Eigen::VectorXd context =
        referenceContext(reference, static_cast<size_t>(t), state.pose.root, forwardKinematics(tree, state.pose).bodies);
    const auto enc = policy.encode(g, g.constant(context.transpose()), g.constant(zPrev));
    const Matrix sd = enc.var.value().cwiseSqrt();
    const Matrix z = enc.mean.value() + sd.cwiseProduct(gaussianNoise(1, d, rng));
    kl += arKlRows(enc.residual, enc.var, policy.config().alpha).value()(0, 0);
    const auto bound = policy.bindDecoder(g);
    ImitationPolicy::DecoderState ds{{g.constant(hState), g.constant(cState)}};
    Matrix proprio(1, 2 * env.actionSize());
    proprio << state.pose.q.transpose(), state.lastAction.transpose();
    const Eigen::VectorXd action = policy.decode(g, bound, ds, g.constant(proprio), g.constant(z)).value().row(0).transpose();
    hState = ds.lstm.h.value();
    cState = ds.lstm.c.value();
    zPrev = z;
    out.latents.row(t) = z;

    const auto& ref = clip.frames[t + 1];
    state = env.step(state, action, ref.root);
    out.trajectory.frames.push_back({state.pose.root, state.pose.q, {}, {}});
    out.deviation[t] = trackingDeviation(measureState(tree, state.pose), measureState(tree, {ref.root, ref.q}));
    absError += (state.pose.q - ref.q).cwiseAbs().mean();
    ++done;
    if (out.deviation[t] > threshold) {
      out.terminatedAt = static_cast<int>(t);
      break;
    }
  }
  out.deviation.conservativeResize(done);
  out.latents.conservativeResize(done, d);
  out.meanAbsError = absError / static_cast<double>(done);
  out.meanKl = kl / static_cast<double>(done);
  return out;
}

namespace {

// Zero-shot metrics over a dataset; also tracks per-dimension latent ranges.
// Rollouts run the full clip so latent statistics see equal-length series;
// a clip counts as terminated when any step exceeds the threshold.
ImitationMetrics evaluateClips(
    const SkillModule& skill,
    const ClipDataset& dataset,
    Rng& rng,
    double threshold,
    Eigen::VectorXd* low = nullptr,
    Eigen::VectorXd* high = nullptr) {
  throwIf(dataset.clips.empty(), "imitation evaluation: empty dataset");
  ImitationMetrics m;
  double error = 0.0, kl = 0.0, autocorr = 0.0, steps = 0.0;
  int series = 0;
  for (const auto& clip : dataset.clips) {
    const auto r = rolloutZeroShot(skill, clip, rng, std::numeric_limits<double>::infinity());
    const auto n = static_cast<double>(r.deviation.size());
    error += r.meanAbsError * n;
    kl += r.meanKl * n;
    steps += n;
    if ((r.deviation.array() > threshold).any()) ++m.terminations;
    if (low) *low = low->cwiseMin(r.latents.colwise().minCoeff().transpose());
    if (high) *high = high->cwiseMax(r.latents.colwise().maxCoeff().transpose());
    if (r.latents.rows() > 2) {
      for (Eigen::Index j = 0; j < r.latents.cols(); ++j) {
        autocorr += lagAutocorrelation(r.latents.col(j), 1);
        ++series;
      }
    }
  }
  m.trackingError = error / steps;
  m.klToPrior = kl / steps;
  m.latentAutocorrelation = series > 0 ? autocorr / series : 0.0;
  return m;
}

}  // namespace

ImitationMetrics evaluateImitation(const SkillModule& skill, const ClipDataset& dataset, uint64_t seed) {
  Rng rng(seed);
  return evaluateClips(skill, dataset, rng, 0.3);
}

ImitationResult trainImitation(
    const ClipDataset& dataset,
    const KinematicTree& tree,
    const ChainWalkerConfig& envConfig,
    const ImitationTrainConfig& config,
    uint64_t seed) {
  config.validate();
  dataset.validate();
  throwIf(dataset.clips.empty(), "imitation training: empty dataset");
  const ChainWalkerEnv env(tree, envConfig);
  std::vector<BodyTrack> tracks;
  std::vector<double> speeds;
  std::vector<size_t> lengths;
  for (const auto& clip : dataset.clips) {
    checkClip(clip, tree, envConfig.controlRate);
    throwIf(
        clip.frameCount() <= static_cast<size_t>(config.excludeLast),
        "imitation training: clip '" + clip.name + "' is not longer than the excluded tail");
    tracks.push_back(clipBodyTransforms(tree, clip));
    speeds.push_back(clipSpeed(clip));
    lengths.push_back(clip.frameCount());
  }
  const ClipSampler sampler(speeds, lengths, config.speedBins, config.excludeLast);

  Rng rng(seed);
  ImitationPolicy policy(config.net, contextSize(tree), tree.referencePose(), rng);
  auto params = policy.parameters();
  Adam adam(params, config.learningRate);
  const int n = env.actionSize();
  const int d = config.net.latentDim;
  const int batch = config.batch;
  const Matrix hi = env.stepLimit().transpose();
  const Matrix lo = -hi;
  const Matrix jointMean = Matrix::Constant(n, 1, 1.0 / n);

  ImitationResult result;
  std::string lastCheckpoint;
  double envSteps = 0.0;
  ImitationCurvePoint epoch;
  for (int it = 0; it < config.iterations; ++it) {
    std::vector<size_t> clipOf(batch), startOf(batch);
    std::vector<int> validOf(batch);
    double count = 0.0;
    for (int b = 0; b < batch; ++b) {
      clipOf[b] = sampler.sampleClip(rng);
      startOf[b] = sampler.sampleStart(clipOf[b], rng);
      const auto usable = static_cast<int>(lengths[clipOf[b]]) - kContextFrames - static_cast<int>(startOf[b]);
      validOf[b] = std::min(config.unroll, usable);
      count += validOf[b];
    }

    Graph g;
    const auto bound = policy.bindDecoder(g);
    auto ds = policy.initialDecoderState(g, batch);
    Matrix q0(batch, n);
    for (int b = 0; b < batch; ++b) q0.row(b) = dataset.clips[clipOf[b]].frames[startOf[b]].q.transpose();
    Var q = g.constant(q0);
    Var last = q;
    Var zPrev = g.constant(Matrix::Zero(batch, d));
    std::vector<Var> trackTerms, klTerms;
    for (int k = 0; k < config.unroll; ++k) {
      // The context depends on the current joints; it enters the graph as its
      // first-order expansion around the current value so gradients see that path.
      Matrix ctx(batch, policy.contextSize());
      std::vector<Matrix> jac(n, Matrix(batch, policy.contextSize()));
      Matrix target(batch, n);
      Matrix mask = Matrix::Zero(batch, 1);
      const Matrix qNow = q.value();
      Eigen::MatrixXd jb;
      for (int b = 0; b < batch; ++b) {
        const auto& clip = dataset.clips[clipOf[b]];
        const size_t t = startOf[b] + std::min(k, validOf[b] - 1);
        const Pose current{clip.frames[t].root, qNow.row(b).transpose()};
        const Eigen::VectorXd x = contextJacobian(tree, tracks[clipOf[b]], t, current, jb);
        ctx.row(b) = (x - jb * current.q).transpose();
        for (int j = 0; j < n; ++j) jac[j].row(b) = jb.col(j).transpose();
        target.row(b) = clip.frames[t + 1].q.transpose();
        if (k < validOf[b]) mask(b, 0) = 1.0;
      }
      Var context = g.constant(ctx);
      const Var spread = g.constant(Matrix::Ones(1, policy.contextSize()));
      for (int j = 0; j < n; ++j) context = context + matmul(sliceCols(q, j, 1), spread) * g.constant(jac[j]);
      const Var m = g.constant(mask);
      const auto enc = policy.encode(g, context, zPrev);
      const Var z = enc.mean + exp(scale(log(enc.var), 0.5)) * g.constant(gaussianNoise(batch, d, rng));
      klTerms.push_back(sum(arKlRows(enc.residual, enc.var, config.net.alpha) * m));
      const Var action = policy.decode(g, bound, ds, concatCols({q, last}), z);
      const Var next = q + clampCols(action - q, lo, hi);
      trackTerms.push_back(sum(matmul(square(next - g.constant(target)), g.constant(jointMean)) * m));
      q = next;
      last = action;
      zPrev = z;
    }
    const double beta = klSchedule(envSteps * config.scheduleStepScale, config.schedule);
    const Var track = scale(sum(concatRows(trackTerms)), 1.0 / count);
    const Var kl = scale(sum(concatRows(klTerms)), 1.0 / count);
    const Var loss = beta > 0.0 ? track + scale(kl, beta) : track;
    const double value = loss.value()(0, 0);
    if (!std::isfinite(value)) {
      throw NumericalFailure("imitation training: loss became non-finite at iteration " + std::to_string(it), lastCheckpoint);
    }
    zeroGrads(params);
    g.backward(loss);
    clipGradients(params, config.gradClip);
    adam.step();
    envSteps += count;

    epoch.loss += value;
    epoch.trackingMse += track.value()(0, 0);
    epoch.kl += kl.value()(0, 0);
    epoch.beta = beta;
    if ((it + 1) % config.epochIterations == 0 || it + 1 == config.iterations) {
      const int len = (it % config.epochIterations) + 1;
      epoch.iteration = it + 1;
      epoch.envSteps = envSteps;
      epoch.loss /= len;
      epoch.trackingMse /= len;
      epoch.kl /= len;
      result.curve.push_back(epoch);
      epoch = {};
      if (!config.checkpointPath.empty()) {
        saveCheckpoint(config.checkpointPath, params, seed);
        lastCheckpoint = config.checkpointPath;
      }
    }
  }

  SkillModule& skill = result.skill;
  skill.prior = Ar1Prior{config.net.alpha, d};
  skill.decoder = policy.decoderToJson(seed);
  skill.metadata = {
      {"encoder", policy.encoderToJson(seed)},
      {"tree", treeToJson(tree)},
      {"env", envToJson(envConfig)},
      {"seed", seed},
      {"iterations", config.iterations},
      {"env_steps", envSteps},
  };
  skill.latentLow = Eigen::VectorXd::Constant(d, -3.0);
  skill.latentHigh = Eigen::VectorXd::Constant(d, 3.0);

  // Latent ranges come from zero-shot rollouts on the training clips.
  Rng evalRng(seed ^ 0x5eedULL);
  Eigen::VectorXd low = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::infinity());
  Eigen::VectorXd high = -low;
  result.metrics = evaluateClips(skill, dataset, evalRng, config.terminationThreshold, &low, &high);
  const ImitationMetrics& m = result.metrics;
  skill.latentLow = low;
  skill.latentHigh = high.cwiseMax((low.array() + 1e-9).matrix());
  skill.metadata["metrics"] = {
      {"tracking_error", m.trackingError},
      {"kl_to_prior", m.klToPrior},
      {"latent_autocorrelation", m.latentAutocorrelation},
      {"terminations", m.terminations}};
  skill.validate();
  return result;
}

PriorRolloutResult rolloutPrior(const SkillModule& skill, int steps, Rng& rng, LatentSource source) {
  throwIf(steps < 1, "prior rollout: steps must be >= 1");
  auto policy = ImitationPolicy::fromJson(skill.decoder, nlohmann::json());
  throwIf(skill.prior.dim != policy.config().latentDim, "prior rollout: prior and decoder latent sizes differ");
  const KinematicTree tree = skillTree(skill);
  const ChainWalkerEnv env(tree, skillEnvConfig(skill));
  const int d = skill.prior.dim;
  const int n = env.actionSize();
  PriorRolloutResult out;
  out.latents = source == LatentSource::kPrior ? samplePriorRollout(skill.prior, steps, rng) : gaussianNoise(steps, d, rng);
  out.actions.resize(steps, n);
  out.trajectory.name = source == LatentSource::kPrior ? "prior_rollout" : "white_noise_rollout";
  out.trajectory.rate = env.config().controlRate;

  MotionFrame start;
  start.root.position = Vec3(0.0, 0.0, 0.5);
  start.q = tree.referencePose();
  ChainState state = env.reset(start);
  out.trajectory.frames.push_back({state.pose.root, state.pose.q, {}, {}});
  Matrix hState = Matrix::Zero(1, policy.config().lstmCells), cState = hState;
  for (int t = 0; t < steps; ++t) {
    Graph g;
    const auto bound = policy.bindDecoder(g);
    ImitationPolicy::DecoderState ds{{g.constant(hState), g.constant(cState)}};
    Matrix proprio(1, 2 * n);
    proprio << state.pose.q.transpose(), state.lastAction.transpose();
    const Matrix z = out.latents.row(t);
    const Eigen::VectorXd action = policy.decode(g, bound, ds, g.constant(proprio), g.constant(z)).value().row(0).transpose();
    hState = ds.lstm.h.value();
    cState = ds.lstm.c.value();
    out.actions.row(t) = action.transpose();
    state = env.step(state, action, start.root);
    out.trajectory.frames.push_back({state.pose.root, state.pose.q, {}, {}});
  }
  if (steps > 1) {
    out.meanActionChange =
        (out.actions.bottomRows(steps - 1) - out.actions.topRows(steps - 1)).cwiseAbs().mean();
  }
  return out;
}

}  // namespace skillforge
