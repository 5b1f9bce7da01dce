#include "skillforge/domainrand/terrain.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "skillforge/common/csv.h"
#include "skillforge/common/error.h"
#include "skillforge/common/random.h"

namespace skillforge {

void TerrainSpec::validate() const {
  throwIf(rows < 2 || cols < 2, "terrain: grid must be at least 2x2");
  throwIf(!(cellSize > 0.0) || !(featureSize > 0.0), "terrain: cell and feature sizes must be > 0");
  throwIf(octaves < 1, "terrain: octaves must be >= 1");
  throwIf(!(persistence > 0.0), "terrain: persistence must be > 0");
  throwIf(!(maxHeight >= 0.0) || !std::isfinite(maxHeight), "terrain: max height must be finite and >= 0");
  throwIf(count < 1, "terrain: count must be >= 1");
}

PerlinNoise::PerlinNoise(uint64_t seed) : perm_(512) {
  std::vector<int> p(256);
  std::iota(p.begin(), p.end(), 0);
  Rng rng(seed);
  std::shuffle(p.begin(), p.end(), rng);
  for (int i = 0; i < 512; ++i) perm_[i] = p[i & 255];
}

namespace {

double fade(double t) {
  return t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
}

double lerp(double a, double b, double t) {
  return a + t * (b - a);
}

double grad(int hash, double x, double y) {
  switch (hash & 7) {
    case 0: return x + y;
    case 1: return -x + y;
    case 2: return x - y;
    case 3: return -x - y;
    case 4: return x;
    case 5: return -x;
    case 6: return y;
    default: return -y;
  }
}

}  // namespace

double PerlinNoise::operator()(double x, double y) const {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const int xi = static_cast<int>(static_cast<int64_t>(fx) & 255);
  const int yi = static_cast<int>(static_cast<int64_t>(fy) & 255);
  const double dx = x - fx;
  const double dy = y - fy;
  const double u = fade(dx);
  const double v = fade(dy);
  const int aa = perm_[perm_[xi] + yi];
  const int ab = perm_[perm_[xi] + yi + 1];
  const int ba = perm_[perm_[xi + 1] + yi];
  const int bb = perm_[perm_[xi + 1] + yi + 1];
  return lerp(
      lerp(grad(aa, dx, dy), grad(ba, dx - 1.0, dy), u),
      lerp(grad(ab, dx, dy - 1.0), grad(bb, dx - 1.0, dy - 1.0), u),
      v);
}

Heightfield generateTerrain(const TerrainSpec& spec, uint64_t seed) {
  spec.validate();
  Heightfield field;
  field.cellSize = spec.cellSize;
  field.heights = Eigen::MatrixXd::Zero(spec.rows, spec.cols);
  if (spec.maxHeight == 0.0) return field;

  uint64_t state = seed;
  std::vector<PerlinNoise> layers;
  std::vector<Eigen::Vector2d> shifts;
  for (int o = 0; o < spec.octaves; ++o) {
    layers.emplace_back(splitmix64(state));
    // Sub-cell shift so grid points never sit on lattice corners, where noise is 0.
    Rng rng(splitmix64(state));
    shifts.emplace_back(uniform(rng, 0.0, 256.0), uniform(rng, 0.0, 256.0));
  }

  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      double h = 0.0;
      double amplitude = 1.0;
      double frequency = spec.cellSize / spec.featureSize;
      for (int o = 0; o < spec.octaves; ++o) {
        h += amplitude * layers[o](c * frequency + shifts[o].x(), r * frequency + shifts[o].y());
        amplitude *= spec.persistence;
        frequency *= 2.0;
      }
      field.heights(r, c) = h;
    }
  }

  const double lo = field.heights.minCoeff();
  const double span = field.heights.maxCoeff() - lo;
  if (!(span > 0.0)) {
    field.heights.setZero();
    return field;
  }
  // (x - lo) / span is exactly 0 at the minimum and exactly 1 at the maximum.
  field.heights = ((field.heights.array() - lo) / span * spec.maxHeight).matrix();
  return field;
}

std::vector<uint64_t> terrainSeeds(const TerrainSpec& spec) {
  spec.validate();
  uint64_t state = spec.seed;
  std::vector<uint64_t> seeds(spec.count);
  for (auto& s : seeds) s = splitmix64(state);
  return seeds;
}

void writeHeightfieldCsv(const Heightfield& field, const std::string& path) {
  CsvTable table;
  for (Eigen::Index c = 0; c < field.heights.cols(); ++c) table.header.push_back("c" + std::to_string(c));
  for (Eigen::Index r = 0; r < field.heights.rows(); ++r) {
    std::vector<double> row(field.heights.cols());
    for (Eigen::Index c = 0; c < field.heights.cols(); ++c) row[c] = field.heights(r, c);
    table.rows.push_back(std::move(row));
  }
  writeCsv(path, table);
}

void writeHeightfieldPgm(const Heightfield& field, double maxHeight, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  throwIf(!out, "terrain: cannot write " + path);
  out << "P5\n# cell_size " << field.cellSize << " max_height " << maxHeight << "\n"
      << field.heights.cols() << " " << field.heights.rows() << "\n65535\n";
  for (Eigen::Index r = 0; r < field.heights.rows(); ++r) {
    for (Eigen::Index c = 0; c < field.heights.cols(); ++c) {
      const double unit = maxHeight > 0.0 ? std::clamp(field.heights(r, c) / maxHeight, 0.0, 1.0) : 0.0;
      const auto v = static_cast<uint16_t>(std::lround(unit * 65535.0));
      const char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
      out.write(bytes, 2);
    }
  }
  throwIf(!out, "terrain: failed writing " + path);
}

Eigen::MatrixXi readPgm16(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  throwIf(!in, "pgm: cannot open " + path);
  std::string magic;
  in >> magic;
  throwIf(magic != "P5", "pgm: " + path + " is not binary greymap");
  auto next = [&]() {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string skip;
      std::getline(in, skip);
      in >> std::ws;
    }
    long v = 0;
    in >> v;
    return v;
  };
  const long cols = next();
  const long rows = next();
  const long maxval = next();
  throwIf(cols <= 0 || rows <= 0 || maxval != 65535, "pgm: unsupported header in " + path);
  in.get();
  Eigen::MatrixXi image(rows, cols);
  for (long r = 0; r < rows; ++r) {
    for (long c = 0; c < cols; ++c) {
      unsigned char b[2];
      in.read(reinterpret_cast<char*>(b), 2);
      throwIf(!in, "pgm: truncated data in " + path);
      image(r, c) = (b[0] << 8) | b[1];
    }
  }
  return image;
}

uint64_t heightfieldHash(const Heightfield& field) {
  uint64_t h = 0xcbf29ce484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(field.heights.data());
  const size_t n = static_cast<size_t>(field.heights.size()) * sizeof(double);
  for (size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace skillforge
