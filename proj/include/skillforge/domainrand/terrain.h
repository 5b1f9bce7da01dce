#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace skillforge {

struct TerrainSpec {
  int rows = 128;
  int cols = 128;
  double cellSize = 0.1;       // m
  double featureSize = 4.0;    // m, wavelength of the first octave
  int octaves = 4;
  double persistence = 0.5;
  double maxHeight = 0.3;      // m, max - min after rescaling
  uint64_t seed = 1;           // root of the seed list
  int count = 128;

  void validate() const;
};

struct Heightfield {
  double cellSize = 0.1;
  Eigen::MatrixXd heights;  // rows x cols, m
};

// Multi-octave gradient noise with quintic fade, rescaled to [0, maxHeight].
Heightfield generateTerrain(const TerrainSpec& spec, uint64_t seed);

// Single octave of 2D gradient noise in roughly [-1, 1].
class PerlinNoise {
 public:
  explicit PerlinNoise(uint64_t seed);
  double operator()(double x, double y) const;

 private:
  std::vector<int> perm_;
};

// Terrain seeds derived from the terrain root seed.
std::vector<uint64_t> terrainSeeds(const TerrainSpec& spec);

void writeHeightfieldCsv(const Heightfield& field, const std::string& path);
// Binary 16-bit PGM, heights mapped linearly from [0, maxHeight] to [0, 65535].
void writeHeightfieldPgm(const Heightfield& field, double maxHeight, const std::string& path);
Eigen::MatrixXi readPgm16(const std::string& path);

// FNV-1a over the raw height bytes, for distinctness checks.
uint64_t heightfieldHash(const Heightfield& field);

}  // namespace skillforge
