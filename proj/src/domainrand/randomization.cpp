#include "skillforge/domainrand/randomization.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "skillforge/common/error.h"

namespace skillforge {

void RandomizationEntry::validate() const {
  const std::string name = element + "/" + attribute;
  throwIf(element.empty() || attribute.empty(), "randomization: entry needs element and attribute");
  throwIf(components < 1, "randomization: " + name + " needs at least one component");
  throwIf(!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c), "randomization: " + name + " has non-finite parameters");
  switch (form) {
    case DrawForm::kProduct:
      throwIf(!(a >= 0.0 && a < 1.0 && b >= 0.0 && b < 1.0), "randomization: " + name + " scale widths must lie in [0, 1)");
      throwIf(!(c > 0.0), "randomization: " + name + " base value must be > 0");
      break;
    case DrawForm::kOffset:
      throwIf(a < 0.0, "randomization: " + name + " offset width must be >= 0");
      break;
    case DrawForm::kSum:
      throwIf(a < 0.0 || b < 0.0 || c < 0.0, "randomization: " + name + " sum terms must be >= 0");
      break;
    case DrawForm::kGlobal:
      throwIf(a < 0.0, "randomization: " + name + " width must be >= 0");
      throwIf(apply == ApplyMode::kValue && !(b - a > 0.0), "randomization: " + name + " must stay positive");
      break;
  }
}

void RandomizationSpec::validate() const {
  for (const auto& e : entries) e.validate();
}

int ElementCounts::count(const std::string& element) const {
  if (element == "body") return bodies;
  if (element == "joint" || element == "actuator") return joints;
  return 1;
}

const EntryDraw& ModelVariation::find(const std::string& element, const std::string& attribute) const {
  for (const auto& d : draws) {
    if (d.element == element && d.attribute == attribute) return d;
  }
  throw InvalidInput("model variation: no entry " + element + "/" + attribute);
}

ModelVariation sampleModelVariation(const RandomizationSpec& spec, const ElementCounts& counts, Rng& rng) {
  spec.validate();
  ModelVariation out;
  for (const auto& e : spec.entries) {
    const int n = e.form == DrawForm::kGlobal ? 1 : counts.count(e.element);
    throwIf(n < 1, "model variation: " + e.element + " count must be >= 1");
    EntryDraw d{e.element, e.attribute, e.apply, Eigen::MatrixXd(n, e.components)};
    for (int k = 0; k < e.components; ++k) {
      switch (e.form) {
        case DrawForm::kProduct: {
          const double global = 1.0 + uniform(rng, -e.a, e.a);
          for (int i = 0; i < n; ++i) d.values(i, k) = global * (1.0 + uniform(rng, -e.b, e.b)) * e.c;
          break;
        }
        case DrawForm::kOffset:
          for (int i = 0; i < n; ++i) d.values(i, k) = uniform(rng, -e.a, e.a);
          break;
        case DrawForm::kSum: {
          const double global = uniform(rng, 0.0, e.a);
          for (int i = 0; i < n; ++i) d.values(i, k) = global + uniform(rng, 0.0, e.b) + e.c;
          break;
        }
        case DrawForm::kGlobal:
          d.values(0, k) = uniform(rng, -e.a, e.a) + e.b;
          break;
      }
    }
    out.draws.push_back(std::move(d));
  }
  return out;
}

nlohmann::json variationToJson(const ModelVariation& variation) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& d : variation.draws) {
    nlohmann::json values = nlohmann::json::array();
    for (int i = 0; i < d.values.rows(); ++i) {
      if (d.values.cols() == 1) {
        values.push_back(d.values(i, 0));
      } else {
        std::vector<double> row(d.values.cols());
        for (int k = 0; k < d.values.cols(); ++k) row[k] = d.values(i, k);
        values.push_back(row);
      }
    }
    entries.push_back({{"element", d.element}, {"attribute", d.attribute}, {"apply", toString(d.apply)}, {"values", values}});
  }
  return {{"format", "model-deltas/1"}, {"entries", entries}};
}

DrawForm parseDrawForm(const std::string& name) {
  if (name == "product") return DrawForm::kProduct;
  if (name == "offset") return DrawForm::kOffset;
  if (name == "sum") return DrawForm::kSum;
  if (name == "global") return DrawForm::kGlobal;
  throw InvalidInput("randomization: unknown form '" + name + "'");
}

ApplyMode parseApplyMode(const std::string& name) {
  if (name == "scale") return ApplyMode::kScale;
  if (name == "offset") return ApplyMode::kOffset;
  if (name == "value") return ApplyMode::kValue;
  throw InvalidInput("randomization: unknown apply mode '" + name + "'");
}

std::string toString(DrawForm form) {
  switch (form) {
    case DrawForm::kProduct: return "product";
    case DrawForm::kOffset: return "offset";
    case DrawForm::kSum: return "sum";
    case DrawForm::kGlobal: return "global";
  }
  return "";
}

std::string toString(ApplyMode mode) {
  switch (mode) {
    case ApplyMode::kScale: return "scale";
    case ApplyMode::kOffset: return "offset";
    case ApplyMode::kValue: return "value";
  }
  return "";
}

void NoiseDelaySpec::validate() const {
  throwIf(!(delayScale >= 0.0) || !(delayOffset >= 0.0), "noise spec: delay parameters must be >= 0");
  for (const auto& [name, s] : sigma) {
    throwIf(s.size() == 0 || !s.allFinite() || (s.array() < 0.0).any(), "noise spec: sigma for '" + name + "' must be finite and >= 0");
  }
}

double sampleDelay(const NoiseDelaySpec& spec, Rng& rng) {
  return spec.delayOffset + exponentialScale(rng, spec.delayScale);
}

NoisyObservations applyObservationNoise(const ObservationStream& stream, const NoiseDelaySpec& spec, Rng& rng) {
  spec.validate();
  const Eigen::Index n = stream.time.size();
  throwIf(n == 0, "observation noise: empty stream");
  for (Eigen::Index k = 1; k < n; ++k) {
    throwIf(!(stream.time[k] > stream.time[k - 1]), "observation noise: timestamps must be strictly increasing");
  }
  for (const auto& [name, values] : stream.channels) {
    throwIf(values.rows() != n, "observation noise: channel '" + name + "' length differs from timestamps");
    auto it = spec.sigma.find(name);
    throwIf(it != spec.sigma.end() && it->second.size() != 1 && it->second.size() != values.cols(),
            "observation noise: sigma for '" + name + "' does not match channel width");
  }

  NoisyObservations out;
  out.delay.resize(n);
  out.sourceIndex.resize(n);
  out.clamped.assign(n, false);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double d = sampleDelay(spec, rng);
    const double query = stream.time[k] - d;
    // Latest sample with time <= query; small tolerance keeps zero delay exact.
    const double* begin = stream.time.data();
    const double* it = std::upper_bound(begin, begin + k + 1, query + 1e-12);
    Eigen::Index src = static_cast<Eigen::Index>(it - begin) - 1;
    if (src < 0) {
      src = 0;
      out.clamped[k] = true;
    }
    out.delay[k] = d;
    out.sourceIndex[k] = static_cast<int>(src);
  }

  for (const auto& [name, values] : stream.channels) {
    Eigen::MatrixXd noisy(n, values.cols());
    auto it = spec.sigma.find(name);
    for (Eigen::Index k = 0; k < n; ++k) {
      noisy.row(k) = values.row(out.sourceIndex[k]);
      if (it == spec.sigma.end()) continue;
      for (Eigen::Index j = 0; j < values.cols(); ++j) {
        const double s = it->second.size() == 1 ? it->second[0] : it->second[j];
        if (s > 0.0) noisy(k, j) += normal(rng, s);
      }
    }
    out.channels[name] = std::move(noisy);
  }
  return out;
}

void PerturbationProcess::validate() const {
  throwIf(!(magnitudeScale > 0.0 && durationScale > 0.0 && gapScale > 0.0), "perturbations: scales must be > 0");
}

std::vector<Perturbation> samplePerturbations(const PerturbationProcess& process, double horizon, Rng& rng) {
  process.validate();
  throwIf(!(horizon > 0.0), "perturbations: horizon must be > 0");
  std::vector<Perturbation> events;
  double t = 0.0;
  while (true) {
    const double start = t + exponentialScale(rng, process.gapScale);
    if (start >= horizon) break;
    const double duration = exponentialScale(rng, process.durationScale);
    const double magnitude = exponentialScale(rng, process.magnitudeScale);
    const double heading = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    Perturbation p;
    p.start = start;
    p.duration = std::min(duration, horizon - start);
    p.force = magnitude * Eigen::Vector2d(std::cos(heading), std::sin(heading));
    events.push_back(p);
    t = start + duration;
  }
  return events;
}

}  // namespace skillforge
