#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>
#include <string>

#include "skillforge/common/random.h"

namespace skillforge {

struct GaussianDiag {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;

  int dim() const {
    return static_cast<int>(mean.size());
  }
  // Throws InvalidInput on size mismatch, non-finite values or var <= 0.
  void validate() const;
  Eigen::VectorXd sample(Rng& rng) const;
};

// KL(p || q) in nats, summed over dimensions.
double gaussianKl(const GaussianDiag& p, const GaussianDiag& q);

// Log density of x under a diagonal Gaussian.
double gaussianLogPdf(const GaussianDiag& g, const Eigen::VectorXd& x);

// z_t ~ N(alpha z_{t-1}, (1 - alpha^2) I); stationary marginal is N(0, I).
struct Ar1Prior {
  double alpha = 0.95;
  int dim = 12;

  void validate() const;
};

GaussianDiag priorStep(const Ar1Prior& prior, const Eigen::VectorXd& zPrev);

// T x dim matrix, row t holds z_{t+1}.
Eigen::MatrixXd samplePriorRollout(const Ar1Prior& prior, int steps, Rng& rng, const Eigen::VectorXd& z0 = {});

// Sample autocorrelation of one column at the given lag.
double lagAutocorrelation(const Eigen::VectorXd& series, int lag);

// Encoder output is a residual on top of the prior mean.
GaussianDiag encoderDistribution(
    const Eigen::VectorXd& meanNet,
    const Eigen::VectorXd& varNet,
    const Eigen::VectorXd& zPrev,
    double alpha);

// Smooth saturation into (low, high) with unit slope at 0. Needs low < 0 < high.
double softClip(double x, double low, double high);

struct ReuseHead {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
  double theta = 0.05;  // 1 - alpha, so a zero mean reproduces the prior mean
  Eigen::VectorXd clipLow;
  Eigen::VectorXd clipHigh;

  void validate() const;
};

struct ReuseDistribution {
  GaussianDiag dist;
  // The previous latent enters as a constant; callers must not backpropagate into it.
  bool previousIsConstant = true;
};

ReuseDistribution reuseDistribution(const ReuseHead& head, const Eigen::VectorXd& zPrev);

struct KlSchedule {
  double betaMax = 0.3;
  double horizon = 1.5e10;  // environment steps
  double exponent = 0.2;

  static KlSchedule imitation() {
    return {};
  }
  // Fixed coefficient, horizon 0 means fully ramped from the start.
  static KlSchedule constant(double beta) {
    return {beta, 0.0, 1.0};
  }
  void validate() const;
};

double klSchedule(double step, const KlSchedule& schedule);

// Everything needed to reuse a trained decoder: prior, latent ranges and the
// decoder checkpoint as an embedded document.
struct SkillModule {
  Ar1Prior prior;
  Eigen::VectorXd latentLow;
  Eigen::VectorXd latentHigh;
  nlohmann::json decoder;
  nlohmann::json metadata = nlohmann::json::object();

  void validate() const;
};

nlohmann::json skillToJson(const SkillModule& skill);
SkillModule skillFromJson(const nlohmann::json& doc);
void saveSkill(const SkillModule& skill, const std::string& path);
SkillModule loadSkill(const std::string& path);

}  // namespace skillforge
