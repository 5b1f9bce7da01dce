#include "skillforge/cli/commands.h"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "skillforge/common/csv.h"
#include "skillforge/common/error.h"
#include "skillforge/retarget/retarget.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace skillforge::cli {

namespace {

void ensureParent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::string hex64(uint64_t value) {
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(value));
  return buffer;
}

void writeText(const std::string& path, const std::string& text) {
  ensureParent(path);
  std::ofstream out(path, std::ios::binary);
  throwIf(!out, "cannot write '" + path + "'");
  out << text;
}

void writeJson(const std::string& path, const json& doc) {
  writeText(path, doc.dump(1) + "\n");
}

// ---------------------------------------------------------------- stages

RetargetResult retargetStage(
    const KinematicTree& tree,
    const MotionClip& reference,
    const std::string& markers,
    const RetargetSettings& settings) {
  RetargetProblem problem;
  problem.tree = tree;
  problem.reference = reference;
  problem.correspondence = markers.empty() ? identityCorrespondence(tree) : loadCorrespondence(markers, tree);
  problem.beta = settings.beta;
  return retargetClip(problem, settings.outerIterations);
}

std::string describeRetarget(const RetargetResult& r) {
  std::ostringstream out;
  out << r.clip.name << ": " << r.clip.frameCount() << " frames, objective " << r.objective.front() << " -> "
      << r.objective.back() << " after " << r.alternations << " alternations";
  if (r.unconvergedFrames > 0) out << ", " << r.unconvergedFrames << " unconverged frames";
  if (!r.discontinuities.empty()) out << ", " << r.discontinuities.size() << " discontinuities";
  return out.str();
}

void writeActuatorReport(const ActuatorTrainReport& report, const std::string& path) {
  std::ostringstream out;
  out << "split,torque_rmse,current_rmse\n";
  const std::pair<const char*, const ActuatorRmse*> rows[] = {
      {"initial_test", &report.initialTest},
      {"train", &report.train},
      {"val", &report.val},
      {"test", &report.test},
  };
  for (const auto& [name, rmse] : rows) {
    out << name << ',' << formatDouble(rmse->torque) << ',' << formatDouble(rmse->current) << '\n';
  }
  writeText(path, out.str());
}

ActuatorTrainReport actuatorStage(
    const ActuatorSettings& settings,
    const ActuatorDataset& data,
    uint64_t seed,
    const std::string& out,
    const std::string& reportPath) {
  Rng rng(seed);
  ActuatorNet net(settings.net, rng);
  ActuatorTrainConfig train = settings.train;
  train.seed = seed;
  train.checkpointPath = out + ".checkpoint";
  ensureParent(out);
  const auto report = trainActuatorNet(net, data, settings.pid, train);
  writeJson(out, net.toJson(seed));
  if (!reportPath.empty()) writeActuatorReport(report, reportPath);
  return report;
}

void writeCurves(const std::vector<ImitationCurvePoint>& curve, const std::string& path) {
  CsvTable table;
  table.header = {"iteration", "env_steps", "beta", "loss", "tracking_mse", "kl"};
  for (const auto& p : curve) {
    table.rows.push_back({static_cast<double>(p.iteration), p.envSteps, p.beta, p.loss, p.trackingMse, p.kl});
  }
  ensureParent(path);
  writeCsv(path, table);
}

ImitationResult imitationStage(
    const ClipDataset& data,
    const KinematicTree& tree,
    const ImitationSettings& settings,
    uint64_t seed,
    const std::string& out,
    const std::string& curves) {
  ImitationTrainConfig train = settings.train;
  train.checkpointPath = out + ".checkpoint";
  ensureParent(out);
  auto result = trainImitation(data, tree, settings.env, train, seed);
  saveSkill(result.skill, out);
  if (!curves.empty()) writeCurves(result.curve, curves);
  return result;
}

void writeTerrains(const TerrainSpec& spec, const std::string& dir, bool pgm, bool csv) {
  fs::create_directories(dir);
  std::ostringstream index;
  index << "index,seed,hash\n";
  const auto seeds = terrainSeeds(spec);
  for (size_t i = 0; i < seeds.size(); ++i) {
    const Heightfield field = generateTerrain(spec, seeds[i]);
    char stem[32];
    std::snprintf(stem, sizeof(stem), "terrain_%03zu", i);
    const fs::path base = fs::path(dir) / stem;
    if (pgm) writeHeightfieldPgm(field, spec.maxHeight, base.string() + ".pgm");
    if (csv) writeHeightfieldCsv(field, base.string() + ".csv");
    index << i << ',' << seeds[i] << ',' << hex64(heightfieldHash(field)) << '\n';
  }
  writeText((fs::path(dir) / "index.csv").string(), index.str());
}

json randomizeStage(const Config& spec, const ElementCounts& counts, uint64_t seed) {
  throwIf(
      !spec.modelRandomization && !spec.ballRandomization,
      spec.path + ": missing section [[model_randomization]] or [[ball_randomization]]");
  RandomizationSpec all;
  for (const auto* part : {&spec.modelRandomization, &spec.ballRandomization}) {
    if (*part) all.entries.insert(all.entries.end(), (*part)->entries.begin(), (*part)->entries.end());
  }
  Rng rng(seed);
  json doc = variationToJson(sampleModelVariation(all, counts, rng));
  doc["seed"] = seed;
  doc["bodies"] = counts.bodies;
  doc["joints"] = counts.joints;
  return doc;
}

void writePriorSamples(const Ar1Prior& prior, int steps, uint64_t seed, const std::string& path) {
  prior.validate();
  throwIf(steps < 1, "sample-prior: --steps must be >= 1");
  Rng rng(seed);
  const Eigen::MatrixXd z = samplePriorRollout(prior, steps, rng);
  CsvTable table;
  for (int j = 0; j < prior.dim; ++j) table.header.push_back("z" + std::to_string(j));
  for (Eigen::Index t = 0; t < z.rows(); ++t) {
    table.rows.emplace_back(z.row(t).data(), z.row(t).data() + z.cols());
  }
  ensureParent(path);
  writeCsv(path, table);
}

ElementCounts treeCounts(const KinematicTree& tree) {
  return {static_cast<int>(tree.bodies.size()), static_cast<int>(tree.jointCount())};
}

KinematicTree requireTree(const Config& config, const std::string& flag) {
  if (!flag.empty()) return loadTree(flag);
  throwIf(config.tree.empty(), config.path + ": no tree given (set `tree` or pass --tree)");
  return loadTree(config.tree);
}

// ---------------------------------------------------------------- kl-eval

CsvTable klTable(const CsvTable& in) {
  int dim = 0;
  while (std::find(in.header.begin(), in.header.end(), "p_mean_" + std::to_string(dim)) != in.header.end()) ++dim;
  throwIf(dim == 0, "kl-eval: expected columns p_mean_0.., p_var_0.., q_mean_0.., q_var_0..");
  std::vector<size_t> cols[4];
  const char* prefixes[4] = {"p_mean_", "p_var_", "q_mean_", "q_var_"};
  for (int k = 0; k < 4; ++k) {
    for (int j = 0; j < dim; ++j) cols[k].push_back(in.column(prefixes[k] + std::to_string(j)));
  }
  CsvTable out;
  out.header = {"row", "kl"};
  for (size_t r = 0; r < in.rows.size(); ++r) {
    GaussianDiag p{Eigen::VectorXd(dim), Eigen::VectorXd(dim)};
    GaussianDiag q{Eigen::VectorXd(dim), Eigen::VectorXd(dim)};
    for (int j = 0; j < dim; ++j) {
      p.mean[j] = in.rows[r][cols[0][j]];
      p.var[j] = in.rows[r][cols[1][j]];
      q.mean[j] = in.rows[r][cols[2][j]];
      q.var[j] = in.rows[r][cols[3][j]];
    }
    try {
      out.rows.push_back({static_cast<double>(r), gaussianKl(p, q)});
    } catch (const InvalidInput& e) {
      throw InvalidInput("kl-eval: row " + std::to_string(r) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- public helpers

CsvTable rewardBreakdown(
    const KinematicTree& tree,
    const MotionClip& clip,
    const MotionClip& reference,
    const ImitationRewardConfig& config) {
  config.validate();
  clip.validate();
  reference.validate();
  throwIf(clip.rate != reference.rate, "reward-eval: clip and reference rates differ");
  throwIf(clip.frameCount() > reference.frameCount(), "reward-eval: reference is shorter than the clip");
  auto velocity = [&](const MotionClip& c, size_t t) -> Eigen::VectorXd {
    if (t == 0) return Eigen::VectorXd::Zero(c.frames[0].q.size());
    return (c.frames[t].q - c.frames[t - 1].q) * c.rate;
  };
  CsvTable table;
  table.header = {"frame", "deviation", "trunc", "com", "vel", "app", "quat", "amp", "total", "terminated"};
  for (size_t t = 0; t < clip.frameCount(); ++t) {
    const auto& a = clip.frames[t];
    const auto& b = reference.frames[t];
    const auto r = imitationReward(
        measureState(tree, {a.root, a.q}, velocity(clip, t)),
        measureState(tree, {b.root, b.q}, velocity(reference, t)),
        config);
    table.rows.push_back(
        {static_cast<double>(t), r.deviation, r.trunc, r.com, r.vel, r.app, r.quat, r.amp, r.total,
         r.terminated ? 1.0 : 0.0});
  }
  return table;
}

std::string hashDirectory(const std::string& dir) {
  throwIf(!fs::is_directory(dir), "hash: '" + dir + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const char* data, size_t n) {
    for (size_t i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(data[i]);
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& f : files) {
    const std::string rel = fs::relative(f, dir).generic_string();
    mix(rel.data(), rel.size() + 1);
    std::ifstream in(f, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string size = std::to_string(bytes.size());
    mix(size.data(), size.size() + 1);
    mix(bytes.data(), bytes.size());
  }
  return hex64(h);
}

std::string runPipeline(const Config& config, const std::string& outDir, uint64_t seed, std::ostream& log) {
  const auto& p = require(config.pipeline, config, "pipeline");
  const auto& imitation = require(config.imitation, config, "imitation");
  const auto& actuator = require(config.actuator, config, "actuator");
  const RetargetSettings retarget = config.retarget.value_or(RetargetSettings{});
  const Config preset = loadConfig(p.preset);
  const KinematicTree tree = requireTree(config, "");
  const fs::path out(outDir);
  fs::create_directories(out);

  uint64_t state = seed;
  const uint64_t actuatorSeed = splitmix64(state);
  const uint64_t imitationSeed = splitmix64(state);
  const uint64_t rolloutSeed = splitmix64(state);
  const uint64_t priorRolloutSeed = splitmix64(state);
  const uint64_t randomizeSeed = splitmix64(state);
  const uint64_t priorSeed = splitmix64(state);

  ClipDataset retargeted;
  fs::create_directories(out / "retarget");
  for (const auto& reference : loadDataset(p.data).clips) {
    const auto r = retargetStage(tree, reference, p.markers, retarget);
    writeRetargetReport(r, (out / "retarget" / (reference.name + ".csv")).string());
    retargeted.clips.push_back(r.clip);
    log << "retarget " << describeRetarget(r) << "\n";
  }
  saveDataset(retargeted, (out / "retargeted").string());

  ClipDataset interpolated;
  for (const auto& c : retargeted.clips) interpolated.clips.push_back(interpolateClip(c, p.interpolateRate));
  saveDataset(interpolated, (out / "interpolated").string());
  const ClipDataset filtered = filterClips(interpolated, tree, p.filter);
  saveDataset(filtered, (out / "filtered").string());
  const ClipDataset chunks = chunkClips(filtered, p.chunkLength);
  saveDataset(chunks, (out / "chunks").string());
  log << "clips: " << retargeted.clips.size() << " retargeted, " << filtered.clips.size() << " after filtering, "
      << chunks.clips.size() << " chunks\n";
  throwIf(chunks.clips.empty(), "pipeline: filtering left no clips");

  const ActuatorDataset actuatorData =
      generateDataset(actuator.drive, actuator.pid, actuator.commands, actuator.actuators, actuatorSeed);
  saveActuatorDataset(actuatorData, (out / "actuator" / "data").string());
  const auto actuatorReport = actuatorStage(
      actuator, actuatorData, actuatorSeed, (out / "actuator" / "model.net").string(),
      (out / "actuator" / "rmse.csv").string());
  log << "actuator test torque rmse " << actuatorReport.initialTest.torque << " -> " << actuatorReport.test.torque
      << " Nm\n";

  const auto im = imitationStage(
      chunks, tree, imitation, imitationSeed, (out / "imitation" / "skill.bin").string(),
      (out / "imitation" / "curves.csv").string());
  log << "imitation tracking error " << im.metrics.trackingError << " rad, kl " << im.metrics.klToPrior << "\n";

  Rng rolloutRng(rolloutSeed);
  const auto& firstChunk = chunks.clips.front();
  const auto zeroShot = rolloutZeroShot(im.skill, firstChunk, rolloutRng, imitation.train.terminationThreshold);
  fs::create_directories(out / "rollout");
  saveClip(zeroShot.trajectory, (out / "rollout" / "zero_shot.clip").string());
  Rng priorRng(priorRolloutSeed);
  const auto prior = rolloutPrior(im.skill, p.rolloutSteps, priorRng);
  saveClip(prior.trajectory, (out / "rollout" / "prior.clip").string());

  const auto& rewardConfig = require(preset.imitationReward, preset, "imitation_reward");
  const CsvTable rewards = rewardBreakdown(tree, zeroShot.trajectory, firstChunk, rewardConfig);
  fs::create_directories(out / "rewards");
  writeCsv((out / "rewards" / "breakdown.csv").string(), rewards);

  TerrainSpec terrain = require(preset.terrain, preset, "terrain");
  terrain.count = p.terrainCount;
  writeTerrains(terrain, (out / "terrain").string(), true, true);

  const KinematicTree robot = requireTree(preset, "");
  writeJson((out / "model" / "deltas.json").string(), randomizeStage(preset, treeCounts(robot), randomizeSeed));

  const Ar1Prior priorSpec = preset.prior.value_or(Ar1Prior{});
  writePriorSamples(priorSpec, p.priorSteps, priorSeed, (out / "prior" / "z.csv").string());
  log << "stages done\n";
  return hashDirectory(outDir);
}

// ---------------------------------------------------------------- argv

namespace {

struct Args {
  std::string tree, ref, markers, out, report, in, data, config, clip, skill, mode = "zero-shot", spec, format = "both";
  std::vector<std::string> configs;
  double beta = 0.01, rate = 30.0, maxLength = 10.0, alpha = 0.95, threshold = 0.3;
  int iterations = 20, dim = 12, steps = 1000, seeds = 0, bodies = 0, joints = 0;
  uint64_t seed = 1;
  FilterOptions filter;
  bool noFeet = false;
};

std::optional<uint64_t> seedFlag(const CLI::App* sub, const Args& args) {
  const CLI::Option* opt = sub->get_option_no_throw("--seed");
  if (opt && opt->count() > 0) return args.seed;
  return std::nullopt;
}

bool given(const CLI::App* sub, const char* name) {
  const CLI::Option* opt = sub->get_option_no_throw(name);
  return opt && opt->count() > 0;
}

void addSeed(CLI::App* sub, Args& a) {
  sub->add_option("--seed", a.seed, "Random seed (overrides SKILLFORGE_SEED and the config)");
}

int dispatch(const CLI::App& app, Args& a, std::ostream& out, std::ostream& err) {
  const CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();

  if (name == "retarget") {
    RetargetSettings settings;
    settings.beta = a.beta;
    settings.outerIterations = a.iterations;
    throwIf(!(a.beta >= 0.0), "retarget: --beta must be >= 0");
    throwIf(a.iterations < 1, "retarget: --iterations must be >= 1");
    const auto r = retargetStage(loadTree(a.tree), loadClip(a.ref), a.markers, settings);
    ensureParent(a.out);
    saveClip(r.clip, a.out);
    if (!a.report.empty()) {
      ensureParent(a.report);
      writeRetargetReport(r, a.report);
    }
    out << describeRetarget(r) << "\n";
  } else if (name == "interp") {
    throwIf(!(a.rate > 0.0), "interp: --rate must be > 0");
    if (fs::is_directory(a.in)) {
      ClipDataset data = loadDataset(a.in);
      for (auto& c : data.clips) c = interpolateClip(c, a.rate);
      saveDataset(data, a.out);
      out << "resampled " << data.clips.size() << " clips to " << a.rate << " Hz\n";
    } else {
      const MotionClip c = interpolateClip(loadClip(a.in), a.rate);
      ensureParent(a.out);
      saveClip(c, a.out);
      out << c.name << ": " << c.frameCount() << " frames at " << a.rate << " Hz\n";
    }
  } else if (name == "filter") {
    a.filter.checkFeet = !a.noFeet;
    const ClipDataset in = loadDataset(a.data);
    const ClipDataset kept = filterClips(in, loadTree(a.tree), a.filter);
    saveDataset(kept, a.out);
    out << in.clips.size() << " clips in, " << kept.clips.size() << " spans kept\n";
  } else if (name == "chunk") {
    const ClipDataset chunks = chunkClips(loadDataset(a.data), a.maxLength);
    saveDataset(chunks, a.out);
    out << chunks.clips.size() << " chunks\n";
  } else if (name == "reward-eval") {
    const Config config = loadConfig(a.config);
    const CsvTable table = rewardBreakdown(
        requireTree(config, a.tree), loadClip(a.clip), loadClip(a.ref),
        require(config.imitationReward, config, "imitation_reward"));
    ensureParent(a.out);
    writeCsv(a.out, table);
    double total = 0.0;
    for (const auto& row : table.rows) total += row[8];
    out << "mean reward " << total / static_cast<double>(table.rows.size()) << " over " << table.rows.size()
        << " frames\n";
  } else if (name == "sample-prior") {
    Ar1Prior prior;
    std::optional<uint64_t> configSeed;
    if (!a.config.empty()) {
      const Config config = loadConfig(a.config);
      prior = require(config.prior, config, "prior");
      configSeed = config.seed;
    }
    if (given(sub, "--alpha") || a.config.empty()) prior.alpha = a.alpha;
    if (given(sub, "--dim") || a.config.empty()) prior.dim = a.dim;
    writePriorSamples(prior, a.steps, resolveSeed(seedFlag(sub, a), configSeed), a.out);
  } else if (name == "kl-eval") {
    const CsvTable table = klTable(readCsv(a.in));
    ensureParent(a.out);
    writeCsv(a.out, table);
    out << table.rows.size() << " pairs\n";
  } else if (name == "gen-actuator-data") {
    const Config config = loadConfig(a.spec);
    const auto& s = require(config.actuator, config, "actuator");
    const uint64_t seed = resolveSeed(seedFlag(sub, a), config.seed);
    saveActuatorDataset(generateDataset(s.drive, s.pid, s.commands, s.actuators, seed), a.out);
    out << s.actuators << " sequences written\n";
  } else if (name == "train-actuator") {
    const Config config = loadConfig(a.spec);
    const auto& s = require(config.actuator, config, "actuator");
    const uint64_t seed = resolveSeed(seedFlag(sub, a), config.seed);
    const auto report = actuatorStage(s, loadActuatorDataset(a.data), seed, a.out, a.report);
    out << "test torque rmse " << report.initialTest.torque << " -> " << report.test.torque << " Nm\n";
  } else if (name == "train-imitation") {
    const Config config = loadConfig(a.config);
    const auto& s = require(config.imitation, config, "imitation");
    const uint64_t seed = resolveSeed(seedFlag(sub, a), config.seed);
    const auto result = imitationStage(loadDataset(a.data), requireTree(config, a.tree), s, seed, a.out, a.report);
    out << "tracking error " << result.metrics.trackingError << " rad, kl " << result.metrics.klToPrior
        << " nats/step, latent autocorrelation " << result.metrics.latentAutocorrelation << "\n";
  } else if (name == "rollout") {
    const SkillModule skill = loadSkill(a.skill);
    Rng rng(resolveSeed(seedFlag(sub, a), std::nullopt));
    ensureParent(a.out);
    if (a.mode == "zero-shot") {
      throwIf(a.clip.empty(), "rollout: --clip is required in zero-shot mode");
      const auto r = rolloutZeroShot(skill, loadClip(a.clip), rng, a.threshold);
      saveClip(r.trajectory, a.out);
      out << "mean joint error " << r.meanAbsError << " rad over " << r.deviation.size() << " steps";
      if (r.terminatedAt >= 0) out << ", terminated at step " << r.terminatedAt;
      out << "\n";
    } else {
      int steps = a.steps;
      if (!given(sub, "--steps") && !a.clip.empty()) steps = static_cast<int>(loadClip(a.clip).frameCount()) - 1;
      const auto r = rolloutPrior(skill, steps, rng);
      saveClip(r.trajectory, a.out);
      out << "mean |action change| " << r.meanActionChange << " rad over " << steps << " steps\n";
    }
  } else if (name == "gen-terrain") {
    const Config config = loadConfig(a.spec);
    TerrainSpec spec = require(config.terrain, config, "terrain");
    if (given(sub, "--seeds")) spec.count = a.seeds;
    throwIf(spec.count < 1, "gen-terrain: --seeds must be >= 1");
    throwIf(a.format != "both" && a.format != "pgm" && a.format != "csv", "gen-terrain: unknown --format");
    writeTerrains(spec, a.out, a.format != "csv", a.format != "pgm");
    out << spec.count << " terrains written\n";
  } else if (name == "randomize-model") {
    const Config config = loadConfig(a.spec);
    ElementCounts counts;
    if (!config.tree.empty()) counts = treeCounts(loadTree(config.tree));
    if (given(sub, "--bodies")) counts.bodies = a.bodies;
    if (given(sub, "--joints")) counts.joints = a.joints;
    throwIf(counts.bodies < 1 || counts.joints < 1, "randomize-model: element counts must be >= 1");
    writeJson(a.out, randomizeStage(config, counts, resolveSeed(seedFlag(sub, a), config.seed)));
  } else if (name == "validate") {
    bool ok = true;
    for (const auto& path : a.configs) {
      const ValidationReport report = validateConfigFile(path);
      if (report.ok()) {
        out << path << ": ok\n";
      } else {
        ok = false;
        err << report.format();
      }
    }
    return ok ? kExitOk : kExitInvalidInput;
  } else if (name == "pipeline") {
    const Config config = loadConfig(a.config);
    const std::string hash = runPipeline(config, a.out, resolveSeed(seedFlag(sub, a), config.seed), err);
    out << "output hash " << hash << "\n";
  }
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Motion-capture skill toolkit: retargeting, clip processing, priors, training and randomization."};
  app.name(argc > 0 ? fs::path(argv[0]).filename().string() : "skillforge");
  app.require_subcommand(1);
  Args a;

  auto* retarget = app.add_subcommand("retarget", "Fit a robot clip to reference markers");
  retarget->add_option("--tree", a.tree, "Robot tree file")->required();
  retarget->add_option("--ref", a.ref, "Reference clip carrying marker positions")->required();
  retarget->add_option("--markers", a.markers, "Marker correspondence file (default: by index)");
  retarget->add_option("--beta", a.beta, "Pull towards the reference pose")->capture_default_str();
  retarget->add_option("--iterations", a.iterations, "Maximum pose/marker alternations")->capture_default_str();
  retarget->add_option("--out", a.out, "Output clip")->required();
  retarget->add_option("--report", a.report, "Objective and residual CSV");

  auto* interp = app.add_subcommand("interp", "Resample a clip or a directory of clips");
  interp->add_option("--in", a.in, "Clip file or directory")->required();
  interp->add_option("--rate", a.rate, "Target rate in Hz")->required();
  interp->add_option("--out", a.out, "Output clip file or directory")->required();

  auto* filter = app.add_subcommand("filter", "Drop infeasible frames and stationary spans");
  filter->add_option("--data", a.data, "Clip directory")->required();
  filter->add_option("--tree", a.tree, "Robot tree file")->required();
  filter->add_option("--out", a.out, "Output directory")->required();
  filter->add_option("--foot-tolerance", a.filter.footHeightTolerance, "m")->capture_default_str();
  filter->add_option("--ground", a.filter.groundHeight, "Ground height, m")->capture_default_str();
  filter->add_option("--stationary-window", a.filter.stationaryWindow, "s")->capture_default_str();
  filter->add_option("--stationary-velocity", a.filter.stationaryVelocity, "m/s")->capture_default_str();
  filter->add_flag("--no-feet", a.noFeet, "Skip the end-effector ground check");

  auto* chunk = app.add_subcommand("chunk", "Split clips into bounded-length chunks");
  chunk->add_option("--data", a.data, "Clip directory")->required();
  chunk->add_option("--max-length", a.maxLength, "Seconds per chunk")->capture_default_str();
  chunk->add_option("--out", a.out, "Output directory")->required();

  auto* reward = app.add_subcommand("reward-eval", "Per-frame imitation reward breakdown");
  reward->add_option("--clip", a.clip, "Robot clip")->required();
  reward->add_option("--ref", a.ref, "Reference clip")->required();
  reward->add_option("--config", a.config, "Config with an [imitation_reward] section")->required();
  reward->add_option("--tree", a.tree, "Tree file (default: the config's tree)");
  reward->add_option("--out", a.out, "Breakdown CSV")->required();

  auto* prior = app.add_subcommand("sample-prior", "Roll out the autoregressive latent prior");
  prior->add_option("--alpha", a.alpha, "Lag-1 coefficient in [0, 1)")->capture_default_str();
  prior->add_option("--dim", a.dim, "Latent dimension")->capture_default_str();
  prior->add_option("--steps", a.steps, "Number of steps")->capture_default_str();
  prior->add_option("--config", a.config, "Config with a [prior] section");
  addSeed(prior, a);
  prior->add_option("--out", a.out, "Output CSV")->required();

  auto* kl = app.add_subcommand("kl-eval", "Row-wise KL between diagonal Gaussians");
  kl->add_option("--in", a.in, "CSV with p_mean_*, p_var_*, q_mean_*, q_var_* columns")->required();
  kl->add_option("--out", a.out, "Output CSV")->required();

  auto* genAct = app.add_subcommand("gen-actuator-data", "Simulate a synthetic actuator dataset");
  genAct->add_option("--spec", a.spec, "Config with an [actuator] section")->required();
  addSeed(genAct, a);
  genAct->add_option("--out", a.out, "Output directory")->required();

  auto* trainAct = app.add_subcommand("train-actuator", "Fit the actuator network");
  trainAct->add_option("--data", a.data, "Actuator dataset directory")->required();
  trainAct->add_option("--spec", a.spec, "Config with an [actuator] section")->required();
  addSeed(trainAct, a);
  trainAct->add_option("--out", a.out, "Network file")->required();
  trainAct->add_option("--report", a.report, "RMSE CSV");

  auto* trainIm = app.add_subcommand("train-imitation", "Train the toy imitation encoder and decoder");
  trainIm->add_option("--data", a.data, "Clip directory at the control rate")->required();
  trainIm->add_option("--config", a.config, "Config with an [imitation] section")->required();
  trainIm->add_option("--tree", a.tree, "Tree file (default: the config's tree)");
  addSeed(trainIm, a);
  trainIm->add_option("--out", a.out, "Skill file")->required();
  trainIm->add_option("--curves", a.report, "Training curve CSV");

  auto* rollout = app.add_subcommand("rollout", "Run a trained skill");
  rollout->add_option("--skill", a.skill, "Skill file")->required();
  rollout->add_option("--clip", a.clip, "Reference clip (zero-shot) or length template (prior)");
  rollout->add_option("--mode", a.mode, "zero-shot or prior")
      ->check(CLI::IsMember({"zero-shot", "prior"}))
      ->capture_default_str();
  rollout->add_option("--steps", a.steps, "Prior rollout length");
  rollout->add_option("--threshold", a.threshold, "Zero-shot termination threshold")->capture_default_str();
  addSeed(rollout, a);
  rollout->add_option("--out", a.out, "Output clip")->required();

  auto* terrain = app.add_subcommand("gen-terrain", "Generate the terrain list");
  terrain->add_option("--spec", a.spec, "Config with a [terrain] section")->required();
  terrain->add_option("--seeds", a.seeds, "Number of terrains (default: the preset's count)");
  terrain->add_option("--format", a.format, "pgm, csv or both")->capture_default_str();
  terrain->add_option("--out", a.out, "Output directory")->required();

  auto* randomize = app.add_subcommand("randomize-model", "Draw one set of model randomization deltas");
  randomize->add_option("--spec", a.spec, "Config with randomization entries")->required();
  randomize->add_option("--bodies", a.bodies, "Body count (default: from the preset's tree)");
  randomize->add_option("--joints", a.joints, "Joint count (default: from the preset's tree)");
  addSeed(randomize, a);
  randomize->add_option("--out", a.out, "Output JSON")->required();

  auto* validate = app.add_subcommand("validate", "Check configs and the files they reference");
  validate->add_option("configs", a.configs, "Config files")->required();

  auto* pipeline = app.add_subcommand("pipeline", "Run every stage from a pipeline config");
  pipeline->add_option("--config", a.config, "Pipeline config")->required();
  addSeed(pipeline, a);
  pipeline->add_option("--out", a.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    err << "Run with --help for usage.\n";
    return kExitUsage;
  }

  try {
    return dispatch(app, a, out, err);
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << "\n";
    if (!e.checkpoint().empty()) err << "last checkpoint: " << e.checkpoint() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const json::exception& e) {
    err << "error: malformed input: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalidInput;
  }
}

}  // namespace skillforge::cli
