#pragma once

#include <string>
#include <vector>

namespace spt2ss {

/// Handling of a constant input sequence, where min-max scaling is undefined.
/// Strict mode rejects it; lenient mode (the dataset-generation path) maps
/// every point to the midpoint 0.5.
enum class GafMode { strict, lenient };

/// Gramian angular field of a scalar sequence: values are min-max scaled to
/// [0,1], mapped to angles theta = arccos(x), and paired into the symmetric
/// matrix g[i][j] = cos(theta_i + theta_j).
struct GafImage {
  int size = 0;
  std::vector<double> g;      // size*size, row-major, entries in [-1, 1]
  std::vector<double> theta;  // radians, in [0, pi/2]
  double data_min = 0.0;
  double data_max = 0.0;
};

/// Requires at least two finite values. Each unordered pair is evaluated
/// once, so g is symmetric to the bit.
GafImage gaf_transform(const std::vector<double>& d, GafMode mode = GafMode::strict);

/// Binary 8-bit PGM (P5), mapping [-1, 1] linearly onto [0, 255] with
/// round-half-up, row-major.
void export_pgm(const GafImage& img, const std::string& path);

/// One matrix row per line, comma separated, shortest round-trip formatting.
void export_gaf_csv(const GafImage& img, const std::string& path);

}  // namespace spt2ss
