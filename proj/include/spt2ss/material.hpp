#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spt2ss/rng.hpp"

namespace spt2ss {

enum class Split { train, test };

/// Material parameter ranges used when sampling specimens.
namespace ranges {
inline constexpr double kSigmaYTrainLo = 20.98;
inline constexpr double kSigmaYTrainHi = 1907.53;
inline constexpr double kSigmaYTestLo = 28.72;
inline constexpr double kSigmaYTestHi = 1823.16;
inline constexpr double kNLo = 0.068;
inline constexpr double kNHi = 0.4046;
inline constexpr double kTLo = 1.0;
inline constexpr double kTHi = 4.0;
}  // namespace ranges

struct MaterialSpec {
  double sigma_y = 0.0;  // yield stress, MPa
  double n = 0.0;        // strain-hardening exponent
  double t = 0.0;        // specimen thickness, mm
  double e_mod = 70000.0;  // Young's modulus, MPa
  double nu = 0.35;        // Poisson's ratio

  friend bool operator==(const MaterialSpec&, const MaterialSpec&) = default;
};

struct GridConfig {
  int l_in = 64;
  int l_out = 64;
  double delta_max = 2.0;  // displacement grid extent, mm
  double eps_max = 0.25;   // strain grid extent

  friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

/// One specimen: its load-displacement input curve and stress-strain target.
struct CurvePair {
  std::vector<double> displacement_grid;  // mm, uniform on [0, delta_max]
  std::vector<double> load;               // N
  std::vector<double> strain_grid;        // uniform on [0, eps_max]
  std::vector<double> stress;             // MPa
  MaterialSpec spec;

  friend bool operator==(const CurvePair&, const CurvePair&) = default;
};

/// Min/max bounds taken over the training split, used for [0,1] scaling of
/// model inputs and targets.
struct NormStats {
  double load_min = 0.0;
  double load_max = 1.0;
  double stress_min = 0.0;
  double stress_max = 1.0;

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

struct Dataset {
  std::vector<CurvePair> samples;
  Split split = Split::train;
  std::uint64_t seed = 0;
  NormStats norm_stats;
};

inline double norm_load(double v, const NormStats& s) {
  return (v - s.load_min) / (s.load_max - s.load_min);
}
inline double norm_stress(double v, const NormStats& s) {
  return (v - s.stress_min) / (s.stress_max - s.stress_min);
}
inline double denorm_stress(double v, const NormStats& s) {
  return v * (s.stress_max - s.stress_min) + s.stress_min;
}

/// Draws sigma_y (log-uniform), n and t (uniform) from the split's ranges.
/// Advances `rng` by exactly three draws.
MaterialSpec sample_material(Rng& rng, Split split);

/// Piecewise flow law: elastic sigma = E*eps up to eps_y = sigma_y/E, then
/// power-law hardening sigma = K*eps^n with K chosen so the branches meet at
/// eps_y. Rejects negative strain.
double flow_stress(const MaterialSpec& spec, double eps);

/// Analytic punch response: eps_eq = 0.25*(delta/t)^1.4 drives the flow law,
/// and P = 2.0 * sigma(eps_eq) * t^1.5 * delta^0.8. Strictly increasing in
/// delta. Rejects delta outside [0, delta_max].
double spt_load(const MaterialSpec& spec, double delta, double delta_max = 2.0);

/// Evaluates both curves of one specimen on the uniform grids.
CurvePair make_curve(const MaterialSpec& spec, const GridConfig& grid);

NormStats compute_norm_stats(const std::vector<CurvePair>& samples);

/// Generates train and test splits. Sample i (counting train first, then
/// test) draws from the child stream rng.split(i), so results do not depend
/// on generation order. Both returned datasets carry the training split's
/// norm_stats.
std::pair<Dataset, Dataset> generate_dataset(int n_train, int n_test, std::uint64_t seed,
                                             const GridConfig& grid = {});

/// Layout: header `id,sigma_y,n,t,load_0..load_{L-1},stress_0..stress_{L-1}`,
/// then one row per sample. Values use shortest round-trip formatting, so
/// read_csv(write_csv(ds)) reproduces every double bit-for-bit.
void write_csv(const Dataset& ds, const std::string& path);

/// Reads a dataset written by write_csv. Sequence lengths come from the
/// header's load/stress runs; `grid` supplies only the delta_max/eps_max
/// extents for rebuilding the uniform grids. norm_stats are recomputed from
/// the rows, which matches the written stats for a training split;
/// evaluation against a checkpoint uses the stats stored there.
/// Malformed input fails with the offending line number or column name.
Dataset read_csv(const std::string& path, const GridConfig& grid = {},
                 Split split = Split::train);

}  // namespace spt2ss
