#include "skillforge/mocap/motion_clip.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "skillforge/common/csv.h"
#include "skillforge/common/error.h"

namespace skillforge {

using nlohmann::json;

double MotionClip::duration() const {
  if (frames.empty() || rate <= 0.0) {
    return 0.0;
  }
  return static_cast<double>(frames.size() - 1) / rate;
}

void MotionClip::validate() const {
  const std::string who = "clip '" + name + "': ";
  throwIf(!(rate > 0.0) || !std::isfinite(rate), who + "rate must be > 0");
  throwIf(frames.size() < 2, who + "at least 2 frames are required");
  const auto& first = frames.front();
  for (size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    const std::string at = who + "frame " + std::to_string(i) + ": ";
    throwIf(f.q.size() != first.q.size(), at + "q has " + std::to_string(f.q.size()) +
        " values, frame 0 has " + std::to_string(first.q.size()));
    throwIf(f.bodies.size() != first.bodies.size(), at + "body count differs from frame 0");
    throwIf(f.markers.size() != first.markers.size(), at + "marker count differs from frame 0");
  }
}

size_t ClipDataset::index(const std::string& name) const {
  for (size_t i = 0; i < clips.size(); ++i) {
    if (clips[i].name == name) {
      return i;
    }
  }
  throw InvalidInput("dataset: no clip named '" + name + "'");
}

void ClipDataset::validate() const {
  std::set<std::string> names;
  for (const auto& c : clips) {
    throwIf(!names.insert(c.name).second, "dataset: duplicate clip name '" + c.name + "'");
    c.validate();
  }
}

namespace {

// `allowMissing` maps JSON null to NaN (an occluded marker).
std::vector<double> readNumbers(
    const json& j,
    size_t expected,
    const std::string& where,
    bool allowMissing = false) {
  throwIf(!j.is_array(), where + " must be an array");
  throwIf(
      expected != 0 && j.size() != expected,
      where + " must have " + std::to_string(expected) + " values, got " + std::to_string(j.size()));
  std::vector<double> out;
  out.reserve(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    if (allowMissing && j[i].is_null()) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    throwIf(!j[i].is_number(), where + "[" + std::to_string(i) + "] is not a finite number");
    out.push_back(j[i].get<double>());
  }
  return out;
}

json numbers(std::initializer_list<double> values) {
  return json(std::vector<double>(values));
}

json frameToJson(const MotionFrame& f) {
  json jf;
  jf["root_pos"] = numbers({f.root.position.x(), f.root.position.y(), f.root.position.z()});
  const auto& q = f.root.orientation;
  jf["root_quat"] = numbers({q.w, q.x, q.y, q.z});
  jf["q"] = std::vector<double>(f.q.data(), f.q.data() + f.q.size());
  if (!f.bodies.empty()) {
    json bodies = json::array();
    for (const auto& b : f.bodies) {
      const auto& o = b.orientation;
      bodies.push_back(numbers({b.position.x(), b.position.y(), b.position.z(), o.w, o.x, o.y, o.z}));
    }
    jf["bodies"] = bodies;
  }
  if (!f.markers.empty()) {
    json markers = json::array();
    for (const auto& m : f.markers) markers.push_back(numbers({m.x(), m.y(), m.z()}));
    jf["markers"] = markers;
  }
  return jf;
}

}  // namespace

MotionClip parseClip(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(source + ": " + e.what());
  }
  throwIf(!doc.is_object(), source + ": top level must be an object");
  throwIf(doc.value("format", std::string()) != "clip/1", source + ": expected format \"clip/1\"");
  MotionClip clip;
  clip.name = doc.value("name", std::filesystem::path(source).stem().string());
  throwIf(!doc.contains("rate") || !doc["rate"].is_number(), source + ": field 'rate' must be a number");
  clip.rate = doc["rate"].get<double>();
  throwIf(!(clip.rate > 0.0), source + ": field 'rate' must be > 0");
  if (doc.contains("metadata")) {
    for (const auto& [k, v] : doc["metadata"].items()) {
      clip.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }
  throwIf(!doc.contains("frames") || !doc["frames"].is_array(), source + ": field 'frames' must be an array");
  const auto& frames = doc["frames"];
  for (size_t i = 0; i < frames.size(); ++i) {
    const auto& jf = frames[i];
    const std::string at = source + ": frames[" + std::to_string(i) + "]";
    throwIf(!jf.is_object(), at + " must be an object");
    MotionFrame f;
    throwIf(!jf.contains("root_pos"), at + ".root_pos is missing");
    throwIf(!jf.contains("root_quat"), at + ".root_quat is missing");
    throwIf(!jf.contains("q"), at + ".q is missing");
    auto p = readNumbers(jf["root_pos"], 3, at + ".root_pos");
    auto r = readNumbers(jf["root_quat"], 4, at + ".root_quat");
    f.root.position = Vec3(p[0], p[1], p[2]);
    f.root.orientation = Quaternion{r[0], r[1], r[2], r[3]};
    throwIf(std::abs(f.root.orientation.norm() - 1.0) > 1e-6, at + ".root_quat is not a unit quaternion");
    auto q = readNumbers(jf["q"], 0, at + ".q");
    f.q = Eigen::Map<Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size()));
    if (jf.contains("bodies")) {
      const auto& jb = jf["bodies"];
      throwIf(!jb.is_array(), at + ".bodies must be an array");
      for (size_t b = 0; b < jb.size(); ++b) {
        auto v = readNumbers(jb[b], 7, at + ".bodies[" + std::to_string(b) + "]");
        f.bodies.push_back({Vec3(v[0], v[1], v[2]), Quaternion{v[3], v[4], v[5], v[6]}});
      }
    }
    if (jf.contains("markers")) {
      const auto& jm = jf["markers"];
      throwIf(!jm.is_array(), at + ".markers must be an array");
      for (size_t m = 0; m < jm.size(); ++m) {
        auto v = readNumbers(jm[m], 3, at + ".markers[" + std::to_string(m) + "]", true);
        f.markers.emplace_back(v[0], v[1], v[2]);
      }
    }
    if (!clip.frames.empty()) {
      const auto& first = clip.frames.front();
      throwIf(
          f.q.size() != first.q.size(),
          at + ".q has " + std::to_string(f.q.size()) + " values but frames[0].q has " +
              std::to_string(first.q.size()));
      throwIf(f.bodies.size() != first.bodies.size(), at + ".bodies count differs from frames[0]");
      throwIf(f.markers.size() != first.markers.size(), at + ".markers count differs from frames[0]");
    }
    clip.frames.push_back(std::move(f));
  }
  throwIf(clip.frames.size() < 2, source + ": at least 2 frames are required");
  return clip;
}

std::string serializeClip(const MotionClip& clip) {
  // One frame per line keeps files diff-friendly and parse errors local.
  std::ostringstream out;
  json header;
  header["format"] = "clip/1";
  header["name"] = clip.name;
  header["rate"] = clip.rate;
  header["metadata"] = json::object();
  for (const auto& [k, v] : clip.metadata) header["metadata"][k] = v;
  out << "{\"format\":" << header["format"].dump() << ",\n";
  out << "\"name\":" << header["name"].dump() << ",\n";
  out << "\"rate\":" << header["rate"].dump() << ",\n";
  out << "\"metadata\":" << header["metadata"].dump() << ",\n";
  out << "\"frames\":[\n";
  for (size_t i = 0; i < clip.frames.size(); ++i) {
    out << frameToJson(clip.frames[i]).dump() << (i + 1 < clip.frames.size() ? ",\n" : "\n");
  }
  out << "]}\n";
  return out.str();
}

MotionClip loadClip(const std::string& path) {
  std::ifstream in(path);
  throwIf(!in, "clip: cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parseClip(buffer.str(), path);
}

void saveClip(const MotionClip& clip, const std::string& path) {
  for (const auto& f : clip.frames) {
    throwIf(!f.q.allFinite() || !f.root.position.allFinite(), "clip: refusing to save non-finite values");
  }
  std::ofstream out(path);
  throwIf(!out, "clip: cannot write '" + path + "'");
  out << serializeClip(clip);
}

void exportClipCsv(const MotionClip& clip, const std::string& path) {
  CsvTable table;
  table.header = {"t", "root_x", "root_y", "root_z", "root_qw", "root_qx", "root_qy", "root_qz"};
  const size_t nq = clip.frames.empty() ? 0 : clip.frames.front().q.size();
  for (size_t j = 0; j < nq; ++j) table.header.push_back("q" + std::to_string(j));
  for (size_t i = 0; i < clip.frames.size(); ++i) {
    const auto& f = clip.frames[i];
    const auto& o = f.root.orientation;
    std::vector<double> row = {
        static_cast<double>(i) / clip.rate, f.root.position.x(), f.root.position.y(),
        f.root.position.z(), o.w, o.x, o.y, o.z};
    for (Eigen::Index j = 0; j < f.q.size(); ++j) row.push_back(f.q[j]);
    table.rows.push_back(std::move(row));
  }
  writeCsv(path, table);
}

ClipDataset loadDataset(const std::string& directory) {
  namespace fs = std::filesystem;
  throwIf(!fs::is_directory(directory), "dataset: '" + directory + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (entry.path().extension() == ".clip") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  ClipDataset dataset;
  for (const auto& f : files) dataset.clips.push_back(loadClip(f.string()));
  dataset.validate();
  return dataset;
}

void saveDataset(const ClipDataset& dataset, const std::string& directory) {
  std::filesystem::create_directories(directory);
  for (const auto& c : dataset.clips) {
    saveClip(c, (std::filesystem::path(directory) / (c.name + ".clip")).string());
  }
}

MotionClip withBodyTransforms(const MotionClip& clip, const KinematicTree& tree) {
  MotionClip out = clip;
  for (auto& f : out.frames) {
    f.bodies = forwardKinematics(tree, Pose{f.root, f.q}).bodies;
  }
  return out;
}

}  // namespace skillforge
