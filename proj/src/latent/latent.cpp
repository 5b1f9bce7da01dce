#include "skillforge/latent/latent.h"

#include <cmath>
#include <fstream>
#include <numbers>

#include "skillforge/common/error.h"

namespace skillforge {

using json = nlohmann::json;

void GaussianDiag::validate() const {
  throwIf(mean.size() != var.size(), "gaussian: mean and variance sizes differ");
  throwIf(!mean.allFinite() || !var.allFinite(), "gaussian: non-finite parameters");
  throwIf((var.array() <= 0.0).any(), "gaussian: variance must be > 0");
}

Eigen::VectorXd GaussianDiag::sample(Rng& rng) const {
  Eigen::VectorXd z(mean.size());
  for (int i = 0; i < z.size(); ++i) z[i] = mean[i] + std::sqrt(var[i]) * normal(rng);
  return z;
}

double gaussianKl(const GaussianDiag& p, const GaussianDiag& q) {
  p.validate();
  q.validate();
  throwIf(p.dim() != q.dim(), "gaussian kl: dimensions differ");
  const auto ratio = (p.var.array() / q.var.array()).eval();
  const auto gap = ((p.mean - q.mean).array().square() / q.var.array()).eval();
  return 0.5 * (ratio + gap - 1.0 - ratio.log()).sum();
}

double gaussianLogPdf(const GaussianDiag& g, const Eigen::VectorXd& x) {
  throwIf(x.size() != g.mean.size(), "gaussian log pdf: dimension mismatch");
  const double quad = ((x - g.mean).array().square() / g.var.array()).sum();
  return -0.5 * (quad + g.var.array().log().sum() + g.dim() * std::log(2.0 * std::numbers::pi));
}

void Ar1Prior::validate() const {
  throwIf(!(alpha >= 0.0 && alpha < 1.0), "prior: alpha must lie in [0, 1)");
  throwIf(dim < 1, "prior: dimension must be >= 1");
}

GaussianDiag priorStep(const Ar1Prior& prior, const Eigen::VectorXd& zPrev) {
  prior.validate();
  throwIf(zPrev.size() != prior.dim, "prior: latent dimension mismatch");
  return {prior.alpha * zPrev, Eigen::VectorXd::Constant(prior.dim, 1.0 - prior.alpha * prior.alpha)};
}

Eigen::MatrixXd samplePriorRollout(const Ar1Prior& prior, int steps, Rng& rng, const Eigen::VectorXd& z0) {
  prior.validate();
  throwIf(steps < 1, "prior rollout: need at least one step");
  Eigen::VectorXd z = z0.size() == 0 ? Eigen::VectorXd::Zero(prior.dim) : z0;
  Eigen::MatrixXd out(steps, prior.dim);
  for (int t = 0; t < steps; ++t) {
    z = priorStep(prior, z).sample(rng);
    out.row(t) = z.transpose();
  }
  return out;
}

double lagAutocorrelation(const Eigen::VectorXd& series, int lag) {
  const auto n = series.size();
  throwIf(lag < 0 || lag >= n, "autocorrelation: lag out of range");
  const Eigen::VectorXd c = series.array() - series.mean();
  const double denom = c.squaredNorm();
  if (denom == 0.0) return 0.0;
  return c.head(n - lag).dot(c.tail(n - lag)) / denom;
}

GaussianDiag encoderDistribution(
    const Eigen::VectorXd& meanNet,
    const Eigen::VectorXd& varNet,
    const Eigen::VectorXd& zPrev,
    double alpha) {
  throwIf(meanNet.size() != zPrev.size(), "encoder: latent dimension mismatch");
  GaussianDiag g{meanNet + alpha * zPrev, varNet};
  g.validate();
  return g;
}

double softClip(double x, double low, double high) {
  throwIf(!(low < 0.0 && high > 0.0), "soft clip: range must straddle 0");
  return x >= 0.0 ? high * std::tanh(x / high) : -low * std::tanh(x / -low);
}

void ReuseHead::validate() const {
  throwIf(!(theta >= 0.0 && theta <= 1.0), "reuse head: filter constant must lie in [0, 1]");
  throwIf(
      clipLow.size() != mean.size() || clipHigh.size() != mean.size(),
      "reuse head: clip range dimension mismatch");
  throwIf(
      (clipLow.array() >= 0.0).any() || (clipHigh.array() <= 0.0).any(),
      "reuse head: clip range must straddle 0");
}

ReuseDistribution reuseDistribution(const ReuseHead& head, const Eigen::VectorXd& zPrev) {
  head.validate();
  throwIf(zPrev.size() != head.mean.size(), "reuse head: latent dimension mismatch");
  Eigen::VectorXd mean(zPrev.size());
  for (int i = 0; i < mean.size(); ++i) {
    mean[i] = head.theta * softClip(head.mean[i], head.clipLow[i], head.clipHigh[i]) + (1.0 - head.theta) * zPrev[i];
  }
  ReuseDistribution r{{mean, head.var}};
  r.dist.validate();
  return r;
}

void KlSchedule::validate() const {
  throwIf(!(betaMax >= 0.0), "kl schedule: beta max must be >= 0");
  throwIf(!(horizon >= 0.0), "kl schedule: horizon must be >= 0");
  throwIf(!(exponent > 0.0), "kl schedule: exponent must be > 0");
}

double klSchedule(double step, const KlSchedule& schedule) {
  schedule.validate();
  throwIf(!(step >= 0.0), "kl schedule: step must be >= 0");
  const double progress = schedule.horizon == 0.0 ? 1.0 : std::min(1.0, step / schedule.horizon);
  return schedule.betaMax * (1.0 - std::pow(1.0 - progress, schedule.exponent));
}

void SkillModule::validate() const {
  prior.validate();
  throwIf(
      latentLow.size() != prior.dim || latentHigh.size() != prior.dim,
      "skill: latent range dimension mismatch");
  throwIf((latentLow.array() > latentHigh.array()).any(), "skill: latent range has low > high");
}

namespace {

json vectorToJson(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vectorFromJson(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

json skillToJson(const SkillModule& skill) {
  skill.validate();
  return {
      {"format", "skill/1"},
      {"alpha", skill.prior.alpha},
      {"dim", skill.prior.dim},
      {"latent_low", vectorToJson(skill.latentLow)},
      {"latent_high", vectorToJson(skill.latentHigh)},
      {"decoder", skill.decoder},
      {"metadata", skill.metadata},
  };
}

SkillModule skillFromJson(const json& doc) {
  SkillModule skill;
  try {
    throwIf(doc.value("format", "") != "skill/1", "skill: expected format 'skill/1'");
    skill.prior.alpha = doc.at("alpha").get<double>();
    skill.prior.dim = doc.at("dim").get<int>();
    skill.latentLow = vectorFromJson(doc.at("latent_low"));
    skill.latentHigh = vectorFromJson(doc.at("latent_high"));
    skill.decoder = doc.at("decoder");
    if (doc.contains("metadata")) skill.metadata = doc["metadata"];
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("skill: ") + e.what());
  }
  skill.validate();
  return skill;
}

void saveSkill(const SkillModule& skill, const std::string& path) {
  const auto doc = skillToJson(skill);
  std::ofstream out(path);
  throwIf(!out, "skill: cannot write '" + path + "'");
  out << doc.dump() << '\n';
}

SkillModule loadSkill(const std::string& path) {
  std::ifstream in(path);
  throwIf(!in, "skill: cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput("skill: " + path + ": " + e.what());
  }
  return skillFromJson(doc);
}

}  // namespace skillforge
