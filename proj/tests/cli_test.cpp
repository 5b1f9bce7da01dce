#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "skillforge/cli/commands.h"

namespace fs = std::filesystem;
using namespace skillforge;
using namespace skillforge::cli;

namespace {

const std::string kData = SKILLFORGE_DATA_DIR;

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "skillforge");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "skillforge_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void writeFile(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
}

std::string readFile(const fs::path& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Preset text with one line replaced.
std::string editedPreset(const std::string& from, const std::string& to) {
  std::string text = readFile(kData + "/presets/anymal.toml");
  const size_t at = text.find(from);
  EXPECT_NE(at, std::string::npos) << from;
  text.replace(at, from.size(), to);
  const std::string tree = "tree = \"../trees/anymal.json\"";
  text.replace(text.find(tree), tree.size(), "tree = \"" + kData + "/trees/anymal.json\"");
  return text;
}

class EnvSeed {
 public:
  explicit EnvSeed(const char* value) {
    if (value) {
      setenv("SKILLFORGE_SEED", value, 1);
    } else {
      unsetenv("SKILLFORGE_SEED");
    }
  }
  ~EnvSeed() {
    unsetenv("SKILLFORGE_SEED");
  }
};

}  // namespace

TEST(Cli, HelpExitsZero) {
  const auto r = invoke({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("retarget"), std::string::npos);
  EXPECT_NE(r.out.find("randomize-model"), std::string::npos);
  EXPECT_EQ(invoke({"sample-prior", "--help"}).code, 0);
}

TEST(Cli, UsageErrorsExitOneAndNameTheFlag) {
  const auto unknown = invoke({"sample-prior", "--out", "x.csv", "--bogus-flag"});
  EXPECT_EQ(unknown.code, 1);
  EXPECT_NE(unknown.err.find("--bogus-flag"), std::string::npos) << unknown.err;

  const auto missing = invoke({"sample-prior"});
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("--out"), std::string::npos) << missing.err;

  EXPECT_EQ(invoke({}).code, 1);
  EXPECT_EQ(invoke({"no-such-command"}).code, 1);
  EXPECT_EQ(invoke({"rollout", "--skill", "s", "--out", "o", "--mode", "sideways"}).code, 1);
}

TEST(Cli, MissingInputFileIsValidationError) {
  const auto dir = scratch("missing");
  const auto r = invoke({"reward-eval", "--clip", "nope.clip", "--ref", "nope.clip", "--config",
                      kData + "/presets/anymal.toml", "--out", (dir / "b.csv").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope.clip"), std::string::npos);
}

TEST(Validate, ShippedConfigsAreValid) {
  for (const char* file : {"/presets/anymal.toml", "/presets/op3.toml", "/smoke/pipeline.toml", "/smoke/imitation.toml"}) {
    const auto report = validateConfigFile(kData + file);
    EXPECT_TRUE(report.ok()) << file << "\n" << report.format();
  }
  const auto r = invoke({"validate", kData + "/presets/anymal.toml"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find(": ok"), std::string::npos);
}

TEST(Validate, ThresholdAboveTruncationScaleIsReported) {
  const auto dir = scratch("eta");
  writeFile(dir / "bad.toml", editedPreset("termination_threshold = 0.3", "termination_threshold = 0.5"));
  const auto r = invoke({"validate", (dir / "bad.toml").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("imitation_reward.termination_threshold"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("bad.toml:"), std::string::npos);
}

TEST(Validate, AlphaOfOneIsRejected) {
  const auto dir = scratch("alpha");
  writeFile(dir / "bad.toml", editedPreset("alpha = 0.95", "alpha = 1.0"));
  const auto report = validateConfigFile((dir / "bad.toml").string());
  ASSERT_EQ(report.issues.size(), 1u) << report.format();
  EXPECT_EQ(report.issues[0].field, "prior.alpha");
  EXPECT_GT(report.issues[0].line, 0);
}

TEST(Validate, ReportsEveryViolationWithItsPath) {
  const auto dir = scratch("many");
  writeFile(
      dir / "bad.toml",
      "seed = -3\n"
      "tree = \"missing.json\"\n"
      "[walking]\n"
      "nonzero_probability = [0.9, 1.5, 0.5]\n"
      "resolutoin = 0.5\n"
      "[[model_randomization]]\n"
      "element = \"body\"\n"
      "attribute = \"mass\"\n"
      "form = \"product\"\n"
      "apply = \"scale\"\n"
      "a = 1.2\n"
      "[[model_randomization]]\n"
      "element = \"joint\"\n"
      "attribute = \"damping\"\n"
      "form = \"wobbly\"\n"
      "[terrain]\n"
      "rows = 1\n");
  const auto report = validateConfigFile((dir / "bad.toml").string());
  std::set<std::string> fields;
  for (const auto& issue : report.issues) fields.insert(issue.field);
  for (const char* f : {"seed", "tree", "walking.nonzero_probability", "walking.resolutoin", "model_randomization[0]",
                        "model_randomization[1].form", "terrain.rows"}) {
    EXPECT_TRUE(fields.count(f)) << f << "\n" << report.format();
  }
}

TEST(Validate, SyntaxErrorCarriesLine) {
  const auto dir = scratch("syntax");
  writeFile(dir / "bad.toml", "seed = 1\n[prior\nalpha = 0.9\n");
  const auto report = validateConfigFile((dir / "bad.toml").string());
  ASSERT_FALSE(report.ok());
  EXPECT_EQ(report.issues[0].line, 2);
}

TEST(Validate, PipelineReferencesMustExist) {
  const auto dir = scratch("refs");
  writeFile(dir / "p.toml", "[pipeline]\ndata = \"nowhere\"\npreset = \"gone.toml\"\nmarkers = \"m.json\"\n");
  const auto report = validateConfigFile((dir / "p.toml").string());
  std::set<std::string> fields;
  for (const auto& issue : report.issues) fields.insert(issue.field);
  EXPECT_TRUE(fields.count("pipeline.data"));
  EXPECT_TRUE(fields.count("pipeline.preset"));
  EXPECT_TRUE(fields.count("pipeline.markers"));
}

TEST(Cli, SamplePriorSeedPrecedence) {
  const auto dir = scratch("prior");
  writeFile(dir / "p.toml", "seed = 11\n[prior]\nalpha = 0.9\ndim = 3\n");
  auto sample = [&](const std::string& name, std::vector<std::string> extra) {
    std::vector<std::string> args = {"sample-prior", "--config", (dir / "p.toml").string(), "--steps", "50",
                                     "--out", (dir / name).string()};
    args.insert(args.end(), extra.begin(), extra.end());
    EXPECT_EQ(invoke(args).code, 0);
    return readFile(dir / name);
  };
  std::string fromConfig, fromEnv, fromFlag, explicit11, explicit5;
  {
    EnvSeed env(nullptr);
    fromConfig = sample("a.csv", {});
    explicit11 = sample("b.csv", {"--seed", "11"});
    explicit5 = sample("c.csv", {"--seed", "5"});
  }
  {
    EnvSeed env("5");
    fromEnv = sample("d.csv", {});
    fromFlag = sample("e.csv", {"--seed", "11"});
  }
  EXPECT_EQ(fromConfig, explicit11);
  EXPECT_EQ(fromEnv, explicit5);
  EXPECT_NE(fromEnv, fromConfig);
  EXPECT_EQ(fromFlag, explicit11);

  const CsvTable table = readCsv((dir / "a.csv").string());
  EXPECT_EQ(table.header, (std::vector<std::string>{"z0", "z1", "z2"}));
  EXPECT_EQ(table.rows.size(), 50u);
}

TEST(Cli, BadSeedEnvironmentIsValidationError) {
  const auto dir = scratch("badseed");
  EnvSeed env("twelve");
  EXPECT_EQ(invoke({"sample-prior", "--out", (dir / "z.csv").string()}).code, 2);
}

TEST(Cli, SamplePriorRejectsAlphaOne) {
  const auto dir = scratch("alpha1");
  const auto r = invoke({"sample-prior", "--alpha", "1", "--out", (dir / "z.csv").string()});
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, KlEvalMatchesClosedForm) {
  const auto dir = scratch("kl");
  writeFile(
      dir / "pairs.csv",
      "p_mean_0,p_mean_1,p_var_0,p_var_1,q_mean_0,q_mean_1,q_var_0,q_var_1\n"
      "0,0,1,1,0,0,1,1\n"
      "1,-2,0.5,2,0,1,1,3\n");
  ASSERT_EQ(invoke({"kl-eval", "--in", (dir / "pairs.csv").string(), "--out", (dir / "kl.csv").string()}).code, 0);
  const CsvTable t = readCsv((dir / "kl.csv").string());
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][1], 0.0);
  // Per dimension: 0.5 * (vp/vq + (mp-mq)^2/vq - 1 + ln(vq/vp)).
  const double d0 = 0.5 * (0.5 + 1.0 - 1.0 + std::log(2.0));
  const double d1 = 0.5 * (2.0 / 3.0 + 9.0 / 3.0 - 1.0 + std::log(1.5));
  EXPECT_NEAR(t.rows[1][1], d0 + d1, 1e-12);

  writeFile(dir / "neg.csv", "p_mean_0,p_var_0,q_mean_0,q_var_0\n0,-1,0,1\n");
  EXPECT_EQ(invoke({"kl-eval", "--in", (dir / "neg.csv").string(), "--out", (dir / "o.csv").string()}).code, 2);
}

TEST(Cli, RewardEvalOfClipAgainstItself) {
  const auto dir = scratch("reward");
  const std::string clip = kData + "/smoke/reference/walk_03.clip";
  const auto r = invoke({"reward-eval", "--clip", clip, "--ref", clip, "--config", kData + "/presets/anymal.toml",
                      "--tree", kData + "/trees/chain3.json", "--out", (dir / "b.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const CsvTable t = readCsv((dir / "b.csv").string());
  ASSERT_EQ(t.rows.size(), 241u);
  for (const auto& row : t.rows) {
    EXPECT_EQ(row[t.column("deviation")], 0.0);
    EXPECT_NEAR(row[t.column("total")], 1.45, 1e-12);
    EXPECT_EQ(row[t.column("terminated")], 0.0);
  }
}

TEST(Cli, RetargetRecoversSmokeJoints) {
  const auto dir = scratch("retarget");
  const std::string ref = kData + "/smoke/reference/walk_05.clip";
  const auto r = invoke({"retarget", "--tree", kData + "/trees/chain3.json", "--ref", ref, "--markers",
                      kData + "/smoke/markers.json", "--beta", "0", "--out", (dir / "out.clip").string(), "--report",
                      (dir / "report.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const MotionClip truth = loadClip(ref);
  const MotionClip fitted = loadClip((dir / "out.clip").string());
  ASSERT_EQ(fitted.frameCount(), truth.frameCount());
  double worst = 0.0;
  for (size_t t = 0; t < truth.frameCount(); ++t) {
    worst = std::max(worst, (fitted.frames[t].q - truth.frames[t].q).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-3);
  EXPECT_TRUE(fs::exists(dir / "report.csv"));
}

TEST(Cli, ClipProcessingCommands) {
  const auto dir = scratch("clips");
  const std::string ref = kData + "/smoke/reference";
  ASSERT_EQ(invoke({"interp", "--in", ref, "--rate", "30", "--out", (dir / "i").string()}).code, 0);
  const ClipDataset resampled = loadDataset((dir / "i").string());
  ASSERT_EQ(resampled.clips.size(), 10u);
  EXPECT_EQ(resampled.clips[0].rate, 30.0);
  EXPECT_EQ(resampled.clips[0].frameCount(), 121u);

  ASSERT_EQ(invoke({"chunk", "--data", (dir / "i").string(), "--max-length", "1.5", "--out", (dir / "c").string()}).code, 0);
  const ClipDataset chunks = loadDataset((dir / "c").string());
  EXPECT_GT(chunks.clips.size(), 10u);
  size_t frames = 0;
  for (const auto& c : chunks.clips) frames += c.frameCount();
  EXPECT_EQ(frames, 10u * 121u);

  ASSERT_EQ(
      invoke({"filter", "--data", (dir / "i").string(), "--tree", kData + "/trees/chain3.json", "--no-feet", "--out",
           (dir / "f").string()})
          .code,
      0);
  EXPECT_EQ(loadDataset((dir / "f").string()).clips.size(), 10u);
}

TEST(Cli, TerrainAndRandomization) {
  const auto dir = scratch("domain");
  const auto t = invoke({"gen-terrain", "--spec", kData + "/presets/anymal.toml", "--seeds", "3", "--format", "pgm",
                      "--out", (dir / "terrain").string()});
  ASSERT_EQ(t.code, 0) << t.err;
  for (int i = 0; i < 3; ++i) {
    const auto pgm = readPgm16((dir / "terrain" / ("terrain_00" + std::to_string(i) + ".pgm")).string());
    EXPECT_EQ(pgm.minCoeff(), 0);
    EXPECT_EQ(pgm.maxCoeff(), 65535);
  }
  EXPECT_FALSE(fs::exists(dir / "terrain" / "terrain_000.csv"));
  EXPECT_EQ(invoke({"gen-terrain", "--spec", kData + "/presets/op3.toml", "--out", (dir / "x").string()}).code, 2);

  const std::string spec = kData + "/presets/anymal.toml";
  ASSERT_EQ(invoke({"randomize-model", "--spec", spec, "--seed", "4", "--out", (dir / "a.json").string()}).code, 0);
  ASSERT_EQ(invoke({"randomize-model", "--spec", spec, "--seed", "4", "--out", (dir / "b.json").string()}).code, 0);
  EXPECT_EQ(readFile(dir / "a.json"), readFile(dir / "b.json"));
  const auto doc = nlohmann::json::parse(readFile(dir / "a.json"));
  EXPECT_EQ(doc["format"], "model-deltas/1");
  EXPECT_EQ(doc["entries"].size(), 9u);
  const auto& mass = doc["entries"][0];
  EXPECT_EQ(mass["attribute"], "mass");
  EXPECT_EQ(mass["values"].size(), static_cast<size_t>(doc["bodies"].get<int>()));
  for (const auto& v : mass["values"]) {
    EXPECT_GE(v.get<double>(), 0.63);
    EXPECT_LE(v.get<double>(), 1.43);
  }
}

namespace {

// Tiny imitation config on the 60 Hz smoke clips.
std::string tinyImitation(const std::string& extra) {
  return "tree = \"" + kData + "/trees/chain3.json\"\nseed = 2\n[imitation]\nlatent_dim = 3\nencoder_width = 8\n"
         "decoder_width = 8\nlstm_cells = 8\nbatch = 2\nunroll = 6\ncontrol_rate = 60.0\n" + extra;
}

}  // namespace

TEST(Cli, TrainImitationAndRollout) {
  const auto dir = scratch("imitation");
  writeFile(dir / "im.toml", tinyImitation("iterations = 6\nepoch_iterations = 3\n"));
  const std::string data = kData + "/smoke/reference";
  const auto train = invoke({"train-imitation", "--data", data, "--config", (dir / "im.toml").string(), "--out",
                          (dir / "skill.bin").string(), "--curves", (dir / "curves.csv").string()});
  ASSERT_EQ(train.code, 0) << train.err;
  EXPECT_EQ(readCsv((dir / "curves.csv").string()).rows.size(), 2u);

  const std::string skill = (dir / "skill.bin").string();
  const auto zero = invoke({"rollout", "--skill", skill, "--clip", data + "/walk_01.clip", "--mode", "zero-shot",
                         "--threshold", "100", "--out", (dir / "z.clip").string()});
  ASSERT_EQ(zero.code, 0) << zero.err;
  EXPECT_EQ(loadClip((dir / "z.clip").string()).frameCount(), 1u + 241u - 5u);

  const auto prior = invoke({"rollout", "--skill", skill, "--mode", "prior", "--steps", "40", "--seed", "3", "--out",
                          (dir / "p.clip").string()});
  ASSERT_EQ(prior.code, 0) << prior.err;
  EXPECT_EQ(loadClip((dir / "p.clip").string()).frameCount(), 41u);

  ASSERT_EQ(invoke({"interp", "--in", data + "/walk_01.clip", "--rate", "30", "--out", (dir / "slow.clip").string()}).code, 0);
  const auto wrongRate = invoke({"rollout", "--skill", skill, "--clip", (dir / "slow.clip").string(), "--out",
                              (dir / "w.clip").string()});
  EXPECT_EQ(wrongRate.code, 2);
}

TEST(Cli, DivergenceExitsThreeWithCheckpoint) {
  const auto dir = scratch("diverge");
  writeFile(
      dir / "im.toml",
      tinyImitation("iterations = 4\nepoch_iterations = 1\nlearning_rate = 1e300\ngrad_clip = 0.0\n"));
  const auto r = invoke({"train-imitation", "--data", kData + "/smoke/reference", "--config", (dir / "im.toml").string(),
                      "--out", (dir / "skill.bin").string()});
  ASSERT_EQ(r.code, 3) << r.err;
  const std::string marker = "last checkpoint: ";
  const size_t at = r.err.find(marker);
  ASSERT_NE(at, std::string::npos) << r.err;
  std::string path = r.err.substr(at + marker.size());
  path = path.substr(0, path.find('\n'));
  EXPECT_TRUE(fs::exists(path)) << path;
}

TEST(Cli, ActuatorDataAndTraining) {
  const auto dir = scratch("actuator");
  writeFile(
      dir / "spec.toml",
      "seed = 3\n[actuator]\nactuators = 3\n[actuator.commands]\nduration = 1.0\n"
      "[actuator.train]\nbatch = 1\nunroll = 100\niterations = 2\nepoch_iterations = 1\n");
  ASSERT_EQ(invoke({"gen-actuator-data", "--spec", (dir / "spec.toml").string(), "--out", (dir / "data").string()}).code, 0);
  const auto r = invoke({"train-actuator", "--data", (dir / "data").string(), "--spec", (dir / "spec.toml").string(),
                      "--out", (dir / "model.net").string(), "--report", (dir / "rmse.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "model.net"));
  const std::string report = readFile(dir / "rmse.csv");
  EXPECT_EQ(report.rfind("split,torque_rmse,current_rmse\ninitial_test,", 0), 0u) << report;

  writeFile(dir / "bad.toml", "[actuator.net]\nkernels = [2, 2]\ndilations = [1, 1]\n");
  const auto bad = invoke({"train-actuator", "--data", (dir / "data").string(), "--spec", (dir / "bad.toml").string(),
                        "--out", (dir / "m.net").string()});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("actuator.net"), std::string::npos) << bad.err;
}

TEST(Pipeline, TinyRunIsByteIdentical) {
  const auto dir = scratch("pipeline");
  std::string text = readFile(kData + "/smoke/pipeline.toml");
  auto set = [&](const std::string& from, const std::string& to) {
    const size_t at = text.find(from);
    ASSERT_NE(at, std::string::npos) << from;
    text.replace(at, from.size(), to);
  };
  set("tree = \"../trees/chain3.json\"", "tree = \"" + kData + "/trees/chain3.json\"");
  set("data = \"reference\"", "data = \"" + kData + "/smoke/reference\"");
  set("markers = \"markers.json\"", "markers = \"" + kData + "/smoke/markers.json\"");
  set("preset = \"../presets/anymal.toml\"", "preset = \"" + kData + "/presets/anymal.toml\"");
  set("iterations = 600\nepoch_iterations = 100", "iterations = 4\nepoch_iterations = 2");
  set("iterations = 80\nepoch_iterations = 20", "iterations = 2\nepoch_iterations = 1");
  set("outer_iterations = 10", "outer_iterations = 2");
  writeFile(dir / "p.toml", text);

  const auto a = invoke({"pipeline", "--config", (dir / "p.toml").string(), "--out", (dir / "a").string()});
  const auto b = invoke({"pipeline", "--config", (dir / "p.toml").string(), "--out", (dir / "b").string()});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(hashDirectory((dir / "a").string()), hashDirectory((dir / "b").string()));
  EXPECT_TRUE(fs::exists(dir / "a" / "imitation" / "skill.bin"));
  EXPECT_TRUE(fs::exists(dir / "a" / "terrain" / "terrain_003.pgm"));

  const auto c = invoke({"pipeline", "--config", (dir / "p.toml").string(), "--seed", "2", "--out", (dir / "c").string()});
  ASSERT_EQ(c.code, 0);
  EXPECT_NE(a.out, c.out);
}

TEST(HashDirectory, SeesNamesAndContents) {
  const auto dir = scratch("hash");
  fs::create_directories(dir / "x" / "sub");
  writeFile(dir / "x" / "sub" / "a.txt", "one");
  const std::string h0 = hashDirectory((dir / "x").string());
  writeFile(dir / "x" / "sub" / "a.txt", "two");
  const std::string h1 = hashDirectory((dir / "x").string());
  fs::rename(dir / "x" / "sub" / "a.txt", dir / "x" / "sub" / "b.txt");
  const std::string h2 = hashDirectory((dir / "x").string());
  EXPECT_NE(h0, h1);
  EXPECT_NE(h1, h2);
  EXPECT_EQ(h0.size(), 16u);
}
