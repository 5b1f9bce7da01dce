#include "skillforge/actuator/drive.h"

#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>

#include "skillforge/common/csv.h"
#include "skillforge/common/error.h"

namespace skillforge {

using json = nlohmann::json;

void PidConfig::validate() const {
  throwIf(!(p >= 0.0 && d >= 0.0), "pid: gains must be >= 0");
  throwIf(!(rate > 0.0), "pid: rate must be > 0");
}

double pidReferenceTorque(double tauBar, double positionError, double velocity, const PidConfig& config) {
  throwIf(
      !std::isfinite(tauBar) || !std::isfinite(positionError) || !std::isfinite(velocity),
      "pid: non-finite input");
  const double rpm = velocity * 60.0 / (2.0 * std::numbers::pi);
  return tauBar + config.p * positionError - config.d * rpm;
}

void DriveParams::validate() const {
  throwIf(!(damping > 0.0), "drive: damping ratio must be > 0");
  throwIf(!(naturalFrequency > 0.0), "drive: natural frequency must be > 0");
  throwIf(!(rate > 0.0), "drive: rate must be > 0");
  throwIf(
      !(naturalFrequency / rate < std::numbers::pi),
      "drive: natural frequency " + std::to_string(naturalFrequency) + " rad/s must stay below pi * rate = " +
          std::to_string(std::numbers::pi * rate) + " rad/s");
  throwIf(!(torqueLimit > 0.0 && torqueConstant > 0.0), "drive: torque limit and constant must be > 0");
  throwIf(!(coulombFriction >= 0.0 && idleCurrent >= 0.0), "drive: friction and idle current must be >= 0");
}

double settlingTime(const DriveParams& drive) {
  drive.validate();
  const double z = drive.damping;
  throwIf(!(z < 1.0), "settling time: envelope formula needs an underdamped drive");
  return -std::log(0.02 * std::sqrt(1.0 - z * z)) / (z * drive.naturalFrequency);
}

void ActuatorSequence::validate() const {
  const auto n = t.size();
  for (const auto* v : {&tauBar, &eps, &qdot, &temperature, &voltage, &tau, &current}) {
    throwIf(v->size() != n, "actuator sequence '" + name + "': columns differ in length");
    throwIf(!v->allFinite(), "actuator sequence '" + name + "': non-finite value");
  }
  throwIf(!t.allFinite(), "actuator sequence '" + name + "': non-finite time");
}

void simulateDrive(const DriveParams& drive, const PidConfig& pid, ActuatorSequence& seq) {
  drive.validate();
  pid.validate();
  const auto n = seq.tauBar.size();
  throwIf(seq.eps.size() != n || seq.qdot.size() != n, "drive: command columns differ in length");
  const double w = drive.naturalFrequency;
  const double dt = 1.0 / drive.rate;
  // exact zero-order-hold discretization via the augmented exponential
  Eigen::Matrix3d aug = Eigen::Matrix3d::Zero();
  aug(0, 1) = 1.0;
  aug(1, 0) = -w * w;
  aug(1, 1) = -2.0 * drive.damping * w;
  aug(1, 2) = w * w;
  const Eigen::Matrix3d step = (aug * dt).exp();
  const Eigen::Matrix2d a = step.topLeftCorner<2, 2>();
  const Eigen::Vector2d b = step.topRightCorner<2, 1>();

  seq.tau.resize(n);
  seq.current.resize(n);
  Eigen::Vector2d state = Eigen::Vector2d::Zero();
  for (Eigen::Index k = 0; k < n; ++k) {
    seq.tau[k] = state[0];
    seq.current[k] = std::abs(state[0]) / drive.torqueConstant + drive.idleCurrent;
    const double reference = pidReferenceTorque(seq.tauBar[k], seq.eps[k], seq.qdot[k], pid);
    const double saturated = std::clamp(reference, -drive.torqueLimit, drive.torqueLimit);
    const double sign = seq.qdot[k] > 0.0 ? 1.0 : (seq.qdot[k] < 0.0 ? -1.0 : 0.0);
    state = a * state + b * (saturated - drive.coulombFriction * sign);
  }
}

namespace {

// Sum of two sinusoids with random frequency and phase.
Eigen::VectorXd smoothSignal(const Eigen::VectorXd& t, double amplitude, const CommandSchedule& s, Rng& rng) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(t.size());
  for (int c = 0; c < 2; ++c) {
    const double f = uniform(rng, s.minFrequency, s.maxFrequency);
    const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    out.array() += 0.5 * amplitude * (2.0 * std::numbers::pi * f * t.array() + phase).sin();
  }
  return out;
}

}  // namespace

ActuatorSequence generateSequence(
    const DriveParams& drive,
    const PidConfig& pid,
    const CommandSchedule& schedule,
    const std::string& name,
    Rng& rng) {
  drive.validate();
  throwIf(!(schedule.duration > 0.0 && schedule.segmentMean > 0.0), "commands: duration and hold time must be > 0");
  const auto n = static_cast<Eigen::Index>(std::floor(schedule.duration * drive.rate + 1e-9));
  throwIf(n < 1, "commands: duration shorter than one control period");
  ActuatorSequence seq;
  seq.name = name;
  seq.t = Eigen::VectorXd::LinSpaced(n, 0.0, static_cast<double>(n - 1) / drive.rate);
  seq.tauBar.resize(n);
  double level = 0.0;
  double holdUntil = -1.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (seq.t[k] >= holdUntil) {
      level = uniform(rng, -schedule.torqueAmplitude, schedule.torqueAmplitude);
      holdUntil = seq.t[k] + exponentialScale(rng, schedule.segmentMean);
    }
    seq.tauBar[k] = level;
  }
  seq.eps = smoothSignal(seq.t, schedule.errorAmplitude, schedule, rng);
  seq.qdot = smoothSignal(seq.t, schedule.velocityAmplitude, schedule, rng);
  seq.temperature = Eigen::VectorXd::Constant(n, uniform(rng, schedule.temperatureLow, schedule.temperatureHigh));
  seq.voltage = Eigen::VectorXd::Constant(n, uniform(rng, schedule.voltageLow, schedule.voltageHigh));
  simulateDrive(drive, pid, seq);
  return seq;
}

void ActuatorDataset::validate() const {
  throwIf(sequences.empty(), "actuator dataset: no sequences");
  for (const auto& s : sequences) s.validate();
  for (const auto* split : {&train, &val, &test}) {
    for (int i : *split) {
      throwIf(i < 0 || i >= static_cast<int>(sequences.size()), "actuator dataset: split index out of range");
    }
  }
  throwIf(train.empty() || test.empty(), "actuator dataset: train and test splits must be non-empty");
}

ActuatorDataset generateDataset(
    const DriveParams& drive,
    const PidConfig& pid,
    const CommandSchedule& schedule,
    int actuators,
    uint64_t seed) {
  throwIf(actuators < 3, "actuator dataset: need at least 3 actuators for a train/val/test split");
  ActuatorDataset data;
  uint64_t state = seed;
  for (int i = 0; i < actuators; ++i) {
    Rng rng(splitmix64(state));
    char name[32];
    std::snprintf(name, sizeof(name), "actuator_%02d", i);
    data.sequences.push_back(generateSequence(drive, pid, schedule, name, rng));
  }
  // 10:1:1 in units of twelfths
  const int testCount = std::max(1, actuators / 12);
  const int valCount = std::max(1, actuators / 12);
  for (int i = 0; i < actuators; ++i) {
    if (i < actuators - testCount - valCount) {
      data.train.push_back(i);
    } else if (i < actuators - testCount) {
      data.val.push_back(i);
    } else {
      data.test.push_back(i);
    }
  }
  return data;
}

void saveActuatorDataset(const ActuatorDataset& data, const std::string& dir) {
  data.validate();
  std::filesystem::create_directories(dir);
  for (const auto& s : data.sequences) {
    CsvTable table;
    table.header = {"t", "tau_bar", "eps", "qdot", "T", "V", "tau", "I"};
    for (Eigen::Index k = 0; k < s.size(); ++k) {
      table.rows.push_back(
          {s.t[k], s.tauBar[k], s.eps[k], s.qdot[k], s.temperature[k], s.voltage[k], s.tau[k], s.current[k]});
    }
    writeCsv((std::filesystem::path(dir) / (s.name + ".csv")).string(), table);
  }
  json split;
  auto names = [&](const std::vector<int>& idx) {
    json out = json::array();
    for (int i : idx) out.push_back(data.sequences[i].name);
    return out;
  };
  split["format"] = "actuator-split/1";
  split["train"] = names(data.train);
  split["val"] = names(data.val);
  split["test"] = names(data.test);
  std::ofstream out(std::filesystem::path(dir) / "split.json");
  throwIf(!out, "actuator dataset: cannot write split file in '" + dir + "'");
  out << split.dump(2) << '\n';
}

ActuatorDataset loadActuatorDataset(const std::string& dir) {
  const auto splitPath = std::filesystem::path(dir) / "split.json";
  std::ifstream in(splitPath);
  throwIf(!in, "actuator dataset: missing '" + splitPath.string() + "'");
  json split;
  try {
    split = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput("actuator dataset: " + splitPath.string() + ": " + e.what());
  }
  ActuatorDataset data;
  auto load = [&](const char* key, std::vector<int>& idx) {
    throwIf(!split.contains(key), std::string("actuator dataset: split file lacks '") + key + "'");
    for (const auto& name : split[key]) {
      const auto path = std::filesystem::path(dir) / (name.get<std::string>() + ".csv");
      const auto table = readCsv(path.string());
      ActuatorSequence s;
      s.name = name.get<std::string>();
      const auto n = static_cast<Eigen::Index>(table.rows.size());
      std::vector<Eigen::VectorXd*> cols = {
          &s.t, &s.tauBar, &s.eps, &s.qdot, &s.temperature, &s.voltage, &s.tau, &s.current};
      const char* headers[] = {"t", "tau_bar", "eps", "qdot", "T", "V", "tau", "I"};
      for (size_t c = 0; c < cols.size(); ++c) {
        const auto col = table.column(headers[c]);
        cols[c]->resize(n);
        for (Eigen::Index k = 0; k < n; ++k) (*cols[c])[k] = table.rows[k][col];
      }
      idx.push_back(static_cast<int>(data.sequences.size()));
      data.sequences.push_back(std::move(s));
    }
  };
  load("train", data.train);
  load("val", data.val);
  load("test", data.test);
  data.validate();
  return data;
}

Eigen::VectorXd fohInterpolate(const Eigen::VectorXd& setpoints, double inRate, double outRate, double initial) {
  throwIf(!(inRate > 0.0 && outRate >= inRate), "foh: rates must satisfy 0 < in <= out");
  const double ratioReal = outRate / inRate;
  const auto ratio = static_cast<Eigen::Index>(std::llround(ratioReal));
  throwIf(std::abs(ratioReal - static_cast<double>(ratio)) > 1e-9, "foh: output rate must be an integer multiple of input rate");
  const auto n = setpoints.size();
  Eigen::VectorXd out(n * ratio);
  double previous = initial;
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index j = 0; j < ratio; ++j) {
      out[k * ratio + j] = previous + (setpoints[k] - previous) * static_cast<double>(j) / static_cast<double>(ratio);
    }
    previous = setpoints[k];
  }
  return out;
}

}  // namespace skillforge
