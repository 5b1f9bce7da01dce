#include "skillforge/cli/config.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <toml.hpp>

#include "skillforge/common/error.h"
#include "skillforge/kinematics/kinematic_tree.h"
#include "skillforge/retarget/retarget.h"

namespace fs = std::filesystem;

namespace skillforge::cli {

std::string Issue::format() const {
  std::ostringstream out;
  out << file;
  if (line > 0) out << ":" << line;
  out << ": ";
  if (!field.empty()) out << field << ": ";
  out << message;
  return out.str();
}

void ValidationReport::add(std::string file, int line, std::string field, std::string message) {
  issues.push_back({std::move(file), line, std::move(field), std::move(message)});
}

std::string ValidationReport::format() const {
  std::string out;
  for (const auto& issue : issues) {
    out += issue.format();
    out += "\n";
  }
  return out;
}

namespace {

int lineOf(const toml::node* node) {
  return node ? static_cast<int>(node->source().begin.line) : 0;
}

// Typed access to one TOML table. Type errors and unknown keys are reported
// against the dotted field path; failed reads return the fallback.
class Section {
 public:
  Section(const std::string& file, ValidationReport& report, const toml::table* table, std::string prefix)
      : file_(file), report_(report), table_(table), prefix_(std::move(prefix)) {}

  bool present() const {
    return table_ != nullptr;
  }
  std::string field(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }
  const toml::node* node(const std::string& key) {
    used_.insert(key);
    return table_ ? table_->get(key) : nullptr;
  }
  bool has(const std::string& key) const {
    return table_ && table_->contains(key);
  }

  void issue(const std::string& key, const std::string& message) {
    const toml::node* n = table_ ? table_->get(key) : nullptr;
    report_.add(file_, n ? lineOf(n) : lineOf(table_), key.empty() ? prefix_ : field(key), message);
  }
  // Records `message` against `key` unless `ok`.
  void check(bool ok, const std::string& key, const std::string& message) {
    if (!ok) issue(key, message);
  }

  double number(const std::string& key, double fallback) {
    const toml::node* n = node(key);
    if (!n) return fallback;
    if (auto v = n->value<double>()) {
      if (!std::isfinite(*v)) {
        issue(key, "must be finite");
        return fallback;
      }
      return *v;
    }
    issue(key, "expected a number");
    return fallback;
  }

  int integer(const std::string& key, int fallback) {
    const toml::node* n = node(key);
    if (!n) return fallback;
    if (auto v = n->value_exact<int64_t>()) {
      if (*v < INT32_MIN || *v > INT32_MAX) {
        issue(key, "integer out of range");
        return fallback;
      }
      return static_cast<int>(*v);
    }
    issue(key, "expected an integer");
    return fallback;
  }

  std::optional<uint64_t> seed(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    auto v = n->value_exact<int64_t>();
    if (!v || *v < 0) {
      issue(key, "expected a non-negative integer");
      return std::nullopt;
    }
    return static_cast<uint64_t>(*v);
  }

  bool boolean(const std::string& key, bool fallback) {
    const toml::node* n = node(key);
    if (!n) return fallback;
    if (auto v = n->value_exact<bool>()) return *v;
    issue(key, "expected true or false");
    return fallback;
  }

  std::string string(const std::string& key, const std::string& fallback = {}) {
    const toml::node* n = node(key);
    if (!n) return fallback;
    if (auto v = n->value_exact<std::string>()) return *v;
    issue(key, "expected a string");
    return fallback;
  }

  // A relative path is taken relative to the file that names it.
  std::string path(const std::string& key) {
    const std::string raw = string(key);
    if (raw.empty()) return raw;
    const fs::path p(raw);
    if (p.is_absolute()) return p.lexically_normal().string();
    return (fs::path(file_).parent_path() / p).lexically_normal().string();
  }

  // A scalar or an array of numbers.
  Eigen::VectorXd vector(const std::string& key, const Eigen::VectorXd& fallback) {
    const toml::node* n = node(key);
    if (!n) return fallback;
    if (auto v = n->value<double>()) return Eigen::VectorXd::Constant(1, *v);
    const toml::array* arr = n->as_array();
    if (!arr || arr->empty()) {
      issue(key, "expected a number or a non-empty array of numbers");
      return fallback;
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(arr->size()));
    for (size_t i = 0; i < arr->size(); ++i) {
      auto v = (*arr)[i].value<double>();
      if (!v || !std::isfinite(*v)) {
        issue(key, "element " + std::to_string(i) + " is not a finite number");
        return fallback;
      }
      out[static_cast<Eigen::Index>(i)] = *v;
    }
    return out;
  }

  Vec3 vec3(const std::string& key, const Vec3& fallback) {
    if (!has(key)) {
      node(key);
      return fallback;
    }
    const Eigen::VectorXd v = vector(key, fallback);
    if (v.size() != 3) {
      issue(key, "expected 3 numbers");
      return fallback;
    }
    return v;
  }

  std::vector<int> integers(const std::string& key, const std::vector<int>& fallback) {
    const toml::node* n = node(key);
    if (!n) return fallback;
    const toml::array* arr = n->as_array();
    if (!arr) {
      issue(key, "expected an array of integers");
      return fallback;
    }
    std::vector<int> out;
    for (const auto& el : *arr) {
      auto v = el.value_exact<int64_t>();
      if (!v) {
        issue(key, "expected an array of integers");
        return fallback;
      }
      out.push_back(static_cast<int>(*v));
    }
    return out;
  }

  Section child(const std::string& key) {
    const toml::node* n = node(key);
    if (n && !n->is_table()) {
      issue(key, "expected a table");
      n = nullptr;
    }
    return Section(file_, report_, n ? n->as_table() : nullptr, field(key));
  }

  // Tables of an array-of-tables, each with its indexed path.
  std::vector<Section> children(const std::string& key) {
    std::vector<Section> out;
    const toml::node* n = node(key);
    if (!n) return out;
    const toml::array* arr = n->as_array();
    if (!arr) {
      issue(key, "expected an array of tables");
      return out;
    }
    for (size_t i = 0; i < arr->size(); ++i) {
      const std::string path = field(key) + "[" + std::to_string(i) + "]";
      if (!(*arr)[i].is_table()) {
        report_.add(file_, lineOf(&(*arr)[i]), path, "expected a table");
        continue;
      }
      out.emplace_back(file_, report_, (*arr)[i].as_table(), path);
    }
    return out;
  }

  // Reports keys that no reader asked for, usually typos.
  void finish() {
    if (!table_) return;
    for (const auto& [key, value] : *table_) {
      const std::string k(key.str());
      if (!used_.count(k)) {
        report_.add(file_, lineOf(&value), field(k), "unknown key");
      }
    }
  }

  // Runs a library validator and files its message against the section.
  void guard(const std::function<void()>& validator) {
    try {
      validator();
    } catch (const InvalidInput& e) {
      report_.add(file_, lineOf(table_), prefix_, e.what());
    }
  }

  size_t issueCount() const {
    return report_.issues.size();
  }

 private:
  const std::string& file_;
  ValidationReport& report_;
  const toml::table* table_;
  std::string prefix_;
  std::set<std::string> used_;
};

RetargetSettings readRetarget(Section s) {
  RetargetSettings r;
  r.beta = s.number("beta", r.beta);
  r.outerIterations = s.integer("outer_iterations", r.outerIterations);
  s.check(r.beta >= 0.0, "beta", "must be >= 0");
  s.check(r.outerIterations >= 1, "outer_iterations", "must be >= 1");
  s.finish();
  return r;
}

ImitationRewardConfig readImitationReward(Section s) {
  ImitationRewardConfig c;
  c.comWeight = s.number("com_weight", c.comWeight);
  c.appWeight = s.number("end_effector_weight", c.appWeight);
  c.quatWeight = s.number("orientation_weight", c.quatWeight);
  c.truncScale = s.number("trunc_scale", c.truncScale);
  c.comScale = s.number("com_scale", c.comScale);
  c.velScale = s.number("velocity_scale", c.velScale);
  c.appScale = s.number("end_effector_scale", c.appScale);
  c.quatScale = s.number("orientation_scale", c.quatScale);
  c.terminationThreshold = s.number("termination_threshold", c.terminationThreshold);
  c.currentPenalty = s.number("current_penalty", c.currentPenalty);

  for (const char* key : {"com_weight", "end_effector_weight", "orientation_weight"}) {
    if (s.has(key)) s.check(s.number(key, 0.0) >= 0.0, key, "must be >= 0");
  }
  const std::pair<const char*, double> scales[] = {
      {"trunc_scale", c.truncScale},
      {"com_scale", c.comScale},
      {"velocity_scale", c.velScale},
      {"end_effector_scale", c.appScale},
      {"orientation_scale", c.quatScale},
  };
  for (const auto& [key, value] : scales) {
    s.check(value > 0.0, key, "must be > 0");
  }
  s.check(
      c.terminationThreshold > 0.0 && c.terminationThreshold <= c.truncScale,
      "termination_threshold",
      "must satisfy 0 < termination_threshold <= trunc_scale (" + formatDouble(c.terminationThreshold) +
          " vs " + formatDouble(c.truncScale) + ")");
  s.check(c.currentPenalty >= 0.0, "current_penalty", "must be >= 0");
  s.finish();
  return c;
}

WalkingSettings readWalking(Section s) {
  WalkingSettings w;
  w.task.resolution = s.number("resolution", w.task.resolution);
  w.task.filtered = s.boolean("filtered", w.task.filtered);
  w.commandRange = s.vec3("command_range", w.commandRange);
  w.nonzeroProbability = s.vec3("nonzero_probability", w.nonzeroProbability);
  w.switchGap = s.number("switch_gap", w.switchGap);
  s.check(w.task.resolution > 0.0, "resolution", "must be > 0");
  s.check((w.commandRange.array() > 0.0).all(), "command_range", "every component must be > 0");
  s.check(
      (w.nonzeroProbability.array() >= 0.0).all() && (w.nonzeroProbability.array() <= 1.0).all(),
      "nonzero_probability",
      "every component must lie in [0, 1]");
  s.check(w.switchGap > 0.0, "switch_gap", "must be > 0");
  s.finish();
  return w;
}

DribblingSettings readDribbling(Section s) {
  DribblingSettings d;
  d.task.resolution = s.number("resolution", d.task.resolution);
  d.task.minStep = s.number("min_step", d.task.minStep);
  d.task.maxStep = s.number("max_step", d.task.maxStep);
  d.switchGap = s.number("switch_gap", d.switchGap);
  s.check(d.task.resolution > 0.0, "resolution", "must be > 0");
  s.check(d.task.minStep > 0.0, "min_step", "must be > 0");
  s.check(d.task.maxStep >= d.task.minStep, "max_step", "must be >= min_step");
  s.check(d.switchGap > 0.0, "switch_gap", "must be > 0");
  s.finish();
  return d;
}

NoiseDelaySpec readNoise(Section s) {
  NoiseDelaySpec n;
  n.delayScale = s.number("delay_scale", 0.0);
  n.delayOffset = s.number("delay_offset", 0.0);
  s.check(n.delayScale >= 0.0, "delay_scale", "must be >= 0");
  s.check(n.delayOffset >= 0.0, "delay_offset", "must be >= 0");
  Section sigma = s.child("sigma");
  if (sigma.present()) {
    for (const char* channel : {"joint_position", "angular_velocity", "linear_acceleration", "base_orientation"}) {
      if (!sigma.has(channel)) {
        sigma.node(channel);
        continue;
      }
      const Eigen::VectorXd v = sigma.vector(channel, Eigen::VectorXd::Zero(1));
      sigma.check((v.array() >= 0.0).all(), channel, "standard deviations must be >= 0");
      n.sigma[channel] = v;
    }
    sigma.finish();
  }
  s.finish();
  return n;
}

RandomizationSpec readRandomization(Section& parent, const std::string& key) {
  RandomizationSpec spec;
  for (Section e : parent.children(key)) {
    RandomizationEntry entry;
    const size_t before = e.issueCount();
    entry.element = e.string("element");
    entry.attribute = e.string("attribute");
    e.check(!entry.element.empty(), "element", "required");
    e.check(!entry.attribute.empty(), "attribute", "required");
    try {
      entry.form = parseDrawForm(e.string("form", "global"));
    } catch (const InvalidInput& ex) {
      e.issue("form", ex.what());
    }
    try {
      entry.apply = parseApplyMode(e.string("apply", "value"));
    } catch (const InvalidInput& ex) {
      e.issue("apply", ex.what());
    }
    entry.a = e.number("a", entry.a);
    entry.b = e.number("b", entry.b);
    entry.c = e.number("c", entry.c);
    entry.components = e.integer("components", entry.components);
    e.check(entry.components >= 1, "components", "must be >= 1");
    if (e.issueCount() == before) e.guard([&] { entry.validate(); });
    e.finish();
    spec.entries.push_back(entry);
  }
  return spec;
}

PerturbationProcess readPerturbation(Section s) {
  PerturbationProcess p;
  p.magnitudeScale = s.number("magnitude_scale", p.magnitudeScale);
  p.durationScale = s.number("duration_scale", p.durationScale);
  p.gapScale = s.number("gap_scale", p.gapScale);
  s.check(p.magnitudeScale > 0.0, "magnitude_scale", "must be > 0");
  s.check(p.durationScale > 0.0, "duration_scale", "must be > 0");
  s.check(p.gapScale > 0.0, "gap_scale", "must be > 0");
  s.finish();
  return p;
}

Ar1Prior readPrior(Section s) {
  Ar1Prior p;
  p.alpha = s.number("alpha", p.alpha);
  p.dim = s.integer("dim", p.dim);
  s.check(p.alpha >= 0.0 && p.alpha < 1.0, "alpha", "must lie in [0, 1) so that the step variance 1 - alpha^2 is positive");
  s.check(p.dim >= 1, "dim", "must be >= 1");
  s.finish();
  return p;
}

KlSchedule readKlSchedule(Section& s) {
  KlSchedule k;
  k.betaMax = s.number("beta_max", k.betaMax);
  k.horizon = s.number("horizon", k.horizon);
  k.exponent = s.number("exponent", k.exponent);
  s.check(k.betaMax >= 0.0, "beta_max", "must be >= 0");
  s.check(k.horizon >= 0.0, "horizon", "must be >= 0");
  s.check(k.exponent > 0.0, "exponent", "must be > 0");
  return k;
}

ActuatorSettings readActuator(Section s) {
  ActuatorSettings a;
  a.actuators = s.integer("actuators", a.actuators);
  s.check(a.actuators >= 3, "actuators", "must be >= 3 to fill the train, validation and test splits");

  Section pid = s.child("pid");
  a.pid.p = pid.number("p", a.pid.p);
  a.pid.d = pid.number("d", a.pid.d);
  a.pid.rate = pid.number("rate", a.pid.rate);
  pid.check(a.pid.p >= 0.0, "p", "must be >= 0");
  pid.check(a.pid.d >= 0.0, "d", "must be >= 0");
  pid.check(a.pid.rate > 0.0, "rate", "must be > 0");
  pid.finish();

  Section drive = s.child("drive");
  const size_t driveBefore = drive.issueCount();
  a.drive.naturalFrequency = drive.number("natural_frequency", a.drive.naturalFrequency);
  a.drive.damping = drive.number("damping", a.drive.damping);
  a.drive.torqueLimit = drive.number("torque_limit", a.drive.torqueLimit);
  a.drive.coulombFriction = drive.number("coulomb_friction", a.drive.coulombFriction);
  a.drive.torqueConstant = drive.number("torque_constant", a.drive.torqueConstant);
  a.drive.idleCurrent = drive.number("idle_current", a.drive.idleCurrent);
  a.drive.rate = drive.number("rate", a.drive.rate);
  if (drive.issueCount() == driveBefore) drive.guard([&] { a.drive.validate(); });
  drive.finish();

  Section cmd = s.child("commands");
  auto& c = a.commands;
  c.duration = cmd.number("duration", c.duration);
  c.segmentMean = cmd.number("segment_mean", c.segmentMean);
  c.torqueAmplitude = cmd.number("torque_amplitude", c.torqueAmplitude);
  c.errorAmplitude = cmd.number("error_amplitude", c.errorAmplitude);
  c.velocityAmplitude = cmd.number("velocity_amplitude", c.velocityAmplitude);
  c.minFrequency = cmd.number("min_frequency", c.minFrequency);
  c.maxFrequency = cmd.number("max_frequency", c.maxFrequency);
  c.temperatureLow = cmd.number("temperature_low", c.temperatureLow);
  c.temperatureHigh = cmd.number("temperature_high", c.temperatureHigh);
  c.voltageLow = cmd.number("voltage_low", c.voltageLow);
  c.voltageHigh = cmd.number("voltage_high", c.voltageHigh);
  cmd.check(c.duration > 0.0, "duration", "must be > 0");
  cmd.check(c.segmentMean > 0.0, "segment_mean", "must be > 0");
  cmd.check(c.maxFrequency >= c.minFrequency && c.minFrequency > 0.0, "max_frequency", "need 0 < min_frequency <= max_frequency");
  cmd.check(c.temperatureHigh >= c.temperatureLow, "temperature_high", "must be >= temperature_low");
  cmd.check(c.voltageHigh >= c.voltageLow, "voltage_high", "must be >= voltage_low");
  cmd.finish();

  Section net = s.child("net");
  const size_t netBefore = net.issueCount();
  a.net.channels = net.integer("channels", a.net.channels);
  a.net.kernels = net.integers("kernels", a.net.kernels);
  a.net.dilations = net.integers("dilations", a.net.dilations);
  if (net.issueCount() == netBefore) net.guard([&] { a.net.validate(); });
  net.finish();

  Section train = s.child("train");
  const size_t trainBefore = train.issueCount();
  a.train.batch = train.integer("batch", a.train.batch);
  a.train.unroll = train.integer("unroll", a.train.unroll);
  a.train.learningRate = train.number("learning_rate", a.train.learningRate);
  a.train.iterations = train.integer("iterations", a.train.iterations);
  a.train.epochIterations = train.integer("epoch_iterations", a.train.epochIterations);
  if (train.issueCount() == trainBefore) train.guard([&] { a.train.validate(); });
  train.finish();

  s.finish();
  return a;
}

TerrainSpec readTerrain(Section s) {
  TerrainSpec t;
  const size_t before = s.issueCount();
  t.rows = s.integer("rows", t.rows);
  t.cols = s.integer("cols", t.cols);
  t.cellSize = s.number("cell_size", t.cellSize);
  t.featureSize = s.number("feature_size", t.featureSize);
  t.octaves = s.integer("octaves", t.octaves);
  t.persistence = s.number("persistence", t.persistence);
  t.maxHeight = s.number("max_height", t.maxHeight);
  if (auto seed = s.seed("seed")) t.seed = *seed;
  t.count = s.integer("count", t.count);
  s.check(t.rows >= 2 && t.cols >= 2, "rows", "grid must be at least 2 x 2");
  s.check(t.maxHeight >= 0.0, "max_height", "must be >= 0");
  s.check(t.count >= 1, "count", "must be >= 1");
  if (s.issueCount() == before) s.guard([&] { t.validate(); });
  s.finish();
  return t;
}

ImitationSettings readImitation(Section s, std::optional<double> controlRate) {
  ImitationSettings im;
  auto& t = im.train;
  const size_t before = s.issueCount();
  t.net.latentDim = s.integer("latent_dim", t.net.latentDim);
  t.net.encoderWidth = s.integer("encoder_width", t.net.encoderWidth);
  t.net.decoderWidth = s.integer("decoder_width", t.net.decoderWidth);
  t.net.lstmCells = s.integer("lstm_cells", t.net.lstmCells);
  t.net.alpha = s.number("alpha", t.net.alpha);
  s.check(t.net.alpha >= 0.0 && t.net.alpha < 1.0, "alpha", "must lie in [0, 1) so that the step variance 1 - alpha^2 is positive");

  const double beta = s.number("beta", 0.0);
  s.check(beta >= 0.0, "beta", "must be >= 0");
  t.schedule = KlSchedule::constant(beta);
  Section sched = s.child("kl_schedule");
  if (sched.present()) {
    s.check(!s.has("beta"), "beta", "give either beta or [kl_schedule], not both");
    t.schedule = readKlSchedule(sched);
    t.scheduleStepScale = sched.number("step_scale", t.scheduleStepScale);
    sched.check(t.scheduleStepScale > 0.0, "step_scale", "must be > 0");
    sched.finish();
  }
  t.batch = s.integer("batch", t.batch);
  t.unroll = s.integer("unroll", t.unroll);
  t.iterations = s.integer("iterations", t.iterations);
  t.learningRate = s.number("learning_rate", t.learningRate);
  t.gradClip = s.number("grad_clip", t.gradClip);
  t.speedBins = s.integer("speed_bins", t.speedBins);
  t.excludeLast = s.integer("exclude_last", t.excludeLast);
  t.epochIterations = s.integer("epoch_iterations", t.epochIterations);
  t.terminationThreshold = s.number("termination_threshold", t.terminationThreshold);
  im.env.controlRate = s.number("control_rate", controlRate.value_or(im.env.controlRate));
  im.env.velocityLimit = s.number("velocity_limit", im.env.velocityLimit);
  if (s.issueCount() == before) {
    s.guard([&] { t.validate(); });
    s.guard([&] { im.env.validate(); });
  }
  s.finish();
  return im;
}

PipelineSettings readPipeline(Section s) {
  PipelineSettings p;
  p.data = s.path("data");
  p.markers = s.path("markers");
  p.preset = s.path("preset");
  s.check(!p.data.empty(), "data", "required");
  s.check(!p.preset.empty(), "preset", "required");
  p.interpolateRate = s.number("interpolate_rate", p.interpolateRate);
  p.chunkLength = s.number("chunk_length", p.chunkLength);
  p.terrainCount = s.integer("terrain_count", p.terrainCount);
  p.priorSteps = s.integer("prior_steps", p.priorSteps);
  p.rolloutSteps = s.integer("rollout_steps", p.rolloutSteps);
  s.check(p.interpolateRate > 0.0, "interpolate_rate", "must be > 0");
  s.check(p.chunkLength > 0.0, "chunk_length", "must be > 0");
  s.check(p.terrainCount >= 1, "terrain_count", "must be >= 1");
  s.check(p.priorSteps >= 1, "prior_steps", "must be >= 1");
  s.check(p.rolloutSteps >= 1, "rollout_steps", "must be >= 1");

  Section f = s.child("filter");
  auto& o = p.filter;
  o.footHeightTolerance = f.number("foot_height_tolerance", o.footHeightTolerance);
  o.groundHeight = f.number("ground_height", o.groundHeight);
  o.stationaryWindow = f.number("stationary_window", o.stationaryWindow);
  o.stationaryVelocity = f.number("stationary_velocity", o.stationaryVelocity);
  o.checkFeet = f.boolean("check_feet", o.checkFeet);
  f.check(o.footHeightTolerance >= 0.0, "foot_height_tolerance", "must be >= 0");
  f.check(o.stationaryWindow > 0.0, "stationary_window", "must be > 0");
  f.check(o.stationaryVelocity >= 0.0, "stationary_velocity", "must be >= 0");
  f.finish();
  s.finish();
  return p;
}

}  // namespace

Config parseConfig(const std::string& path, ValidationReport& report) {
  Config config;
  config.path = path;
  toml::table doc;
  try {
    doc = toml::parse_file(path);
  } catch (const toml::parse_error& e) {
    const int line = static_cast<int>(e.source().begin.line);
    report.add(path, line, "", std::string(e.description()));
    return config;
  }

  Section root(path, report, &doc, "");
  config.seed = root.seed("seed");
  config.robot = root.string("robot");
  config.tree = root.path("tree");
  if (root.has("control_rate")) {
    config.controlRate = root.number("control_rate", 30.0);
    root.check(*config.controlRate > 0.0, "control_rate", "must be > 0");
  }

  if (Section s = root.child("retarget"); s.present()) config.retarget = readRetarget(s);
  if (Section s = root.child("imitation_reward"); s.present()) config.imitationReward = readImitationReward(s);
  if (Section s = root.child("walking"); s.present()) config.walking = readWalking(s);
  if (Section s = root.child("dribbling"); s.present()) config.dribbling = readDribbling(s);
  if (Section s = root.child("noise"); s.present()) config.noise = readNoise(s);
  if (root.has("model_randomization")) config.modelRandomization = readRandomization(root, "model_randomization");
  if (root.has("ball_randomization")) config.ballRandomization = readRandomization(root, "ball_randomization");
  if (Section s = root.child("perturbation"); s.present()) {
    if (Section p = s.child("imitation"); p.present()) config.imitationPerturbation = readPerturbation(p);
    if (Section p = s.child("reuse"); p.present()) config.reusePerturbation = readPerturbation(p);
    s.finish();
  }
  if (Section s = root.child("prior"); s.present()) config.prior = readPrior(s);
  if (Section s = root.child("kl_schedule"); s.present()) {
    config.klSchedule = readKlSchedule(s);
    s.finish();
  }
  if (Section s = root.child("actuator"); s.present()) config.actuator = readActuator(s);
  if (Section s = root.child("terrain"); s.present()) config.terrain = readTerrain(s);
  if (Section s = root.child("imitation"); s.present()) config.imitation = readImitation(s, config.controlRate);
  if (Section s = root.child("pipeline"); s.present()) config.pipeline = readPipeline(s);
  root.finish();
  return config;
}

namespace {

void checkReferences(const Config& config, ValidationReport& report, std::set<std::string>& visited) {
  const std::string& file = config.path;
  std::optional<KinematicTree> tree;
  if (!config.tree.empty()) {
    try {
      tree = loadTree(config.tree);
    } catch (const Error& e) {
      report.add(file, 0, "tree", e.what());
    }
  }
  if (!config.pipeline) return;
  const auto& p = *config.pipeline;
  if (!p.data.empty()) {
    if (!fs::is_directory(p.data)) {
      report.add(file, 0, "pipeline.data", "directory '" + p.data + "' does not exist");
    } else {
      try {
        const ClipDataset data = loadDataset(p.data);
        if (data.clips.empty()) report.add(file, 0, "pipeline.data", "no .clip files in '" + p.data + "'");
      } catch (const Error& e) {
        report.add(file, 0, "pipeline.data", e.what());
      }
    }
  }
  if (!p.markers.empty()) {
    if (!fs::exists(p.markers)) {
      report.add(file, 0, "pipeline.markers", "file '" + p.markers + "' does not exist");
    } else if (tree) {
      try {
        loadCorrespondence(p.markers, *tree);
      } catch (const Error& e) {
        report.add(file, 0, "pipeline.markers", e.what());
      }
    }
  }
  if (!p.preset.empty()) {
    if (!fs::exists(p.preset)) {
      report.add(file, 0, "pipeline.preset", "file '" + p.preset + "' does not exist");
    } else if (visited.insert(fs::weakly_canonical(p.preset).string()).second) {
      const Config preset = parseConfig(p.preset, report);
      checkReferences(preset, report, visited);
    }
  }
}

}  // namespace

ValidationReport validateConfigFile(const std::string& path) {
  ValidationReport report;
  if (!fs::exists(path)) {
    report.add(path, 0, "", "file does not exist");
    return report;
  }
  const Config config = parseConfig(path, report);
  std::set<std::string> visited{fs::weakly_canonical(path).string()};
  checkReferences(config, report, visited);
  return report;
}

Config loadConfig(const std::string& path) {
  throwIf(!fs::exists(path), "config: cannot open '" + path + "'");
  ValidationReport report;
  Config config = parseConfig(path, report);
  if (!report.ok()) {
    std::string message = report.format();
    message.pop_back();
    throw InvalidInput(message);
  }
  return config;
}

uint64_t resolveSeed(std::optional<uint64_t> flag, std::optional<uint64_t> config) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SKILLFORGE_SEED"); env && *env) {
    const std::string text(env);
    size_t used = 0;
    unsigned long long value = 0;
    try {
      value = std::stoull(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    throwIf(used != text.size() || text.front() == '-', "SKILLFORGE_SEED: expected a non-negative integer, got '" + text + "'");
    return value;
  }
  return config.value_or(1);
}

}  // namespace skillforge::cli
