// Writes the 3-link smoke dataset: reference clips whose markers come from a
// skeleton with slightly longer tip offsets, listed in reverse order, plus the
// correspondence file that maps them back onto the robot markers.
//
//   make_smoke_data data/trees/chain3.json data/smoke

#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "skillforge/envtoy/chain_env.h"

using namespace skillforge;

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: " << argv[0] << " TREE OUT_DIR\n";
    return 1;
  }
  const KinematicTree tree = loadTree(argv[1]);
  const std::filesystem::path out(argv[2]);

  std::vector<Vec3> offsets;
  for (const auto& m : tree.markers) {
    offsets.push_back(m.fixed ? m.offset : m.offset + Vec3(0.02, 0.0, 0.0));
  }

  ClipDataset clips = makeSyntheticChainClips(tree, 10, 60.0, 4.0, 7);
  for (auto& clip : clips.clips) {
    clip.name = "walk_" + clip.name.substr(clip.name.size() - 2);
    clip.metadata["source"] = "smoke";
    for (auto& f : clip.frames) {
      auto markers = forwardKinematics(tree, {f.root, f.q}, offsets).markers;
      f.markers.assign(markers.rbegin(), markers.rend());
    }
  }
  saveDataset(clips, (out / "reference").string());

  nlohmann::json doc;
  doc["format"] = "markers/1";
  doc["pairs"] = nlohmann::json::array();
  const int n = static_cast<int>(tree.markers.size());
  for (int m = 0; m < n; ++m) {
    doc["pairs"].push_back({{"robot", tree.markers[m].name}, {"reference", n - 1 - m}});
  }
  std::ofstream(out / "markers.json") << doc.dump(2) << "\n";
  std::cout << clips.clips.size() << " clips written to " << (out / "reference").string() << "\n";
  return 0;
}
