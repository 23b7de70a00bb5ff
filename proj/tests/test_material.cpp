#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spt2ss/material.hpp"
#include "spt2ss/rng.hpp"

using namespace spt2ss;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

template <class Fn>
std::string thrown_message(Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("flow_stress basics") {
  MaterialSpec spec;
  spec.sigma_y = 500.0;
  spec.n = 0.2;
  spec.t = 2.0;

  CHECK(flow_stress(spec, 0.0) == 0.0);

  const double eps_y = spec.sigma_y / spec.e_mod;
  CHECK(flow_stress(spec, eps_y) == doctest::Approx(500.0).epsilon(1e-12));

  // independent evaluation: K = 500/(500/70000)^0.2, sigma = K * 0.1^0.2
  CHECK(flow_stress(spec, 0.1) == doctest::Approx(847.60910153621774).epsilon(1e-12));

  CHECK_THROWS_AS(flow_stress(spec, -0.01), std::runtime_error);
}

TEST_CASE("flow_stress is continuous at the yield strain") {
  Rng rng(21);
  for (int i = 0; i < 100; ++i) {
    MaterialSpec spec = sample_material(rng, Split::train);
    const double eps_y = spec.sigma_y / spec.e_mod;
    const double below = flow_stress(spec, eps_y * (1.0 - 1e-12));
    const double above = flow_stress(spec, eps_y * (1.0 + 1e-12));
    CHECK(std::abs(above - below) < 1e-9 * spec.sigma_y + 1e-9);
  }
}

TEST_CASE("flow_stress is nondecreasing in strain") {
  Rng rng(22);
  for (int i = 0; i < 20; ++i) {
    MaterialSpec spec = sample_material(rng, Split::train);
    double prev = -1.0;
    for (int j = 0; j <= 200; ++j) {
      const double s = flow_stress(spec, 0.25 * j / 200.0);
      CHECK(s >= prev);
      prev = s;
    }
  }
}

TEST_CASE("spt_load oracle and domain") {
  MaterialSpec spec;
  spec.sigma_y = 500.0;
  spec.n = 0.2;
  spec.t = 2.0;

  CHECK(spt_load(spec, 0.0) == 0.0);

  // eps_eq = 0.25 * 0.5^1.4, then Hollomon, then P = 2 sigma t^1.5 delta^0.8;
  // lands in the rig's 20 kN load scale
  const double p = spt_load(spec, 1.0);
  CHECK(p == doctest::Approx(4743.1865253942604).epsilon(1e-12));
  CHECK(p < 20000.0);

  CHECK_THROWS_AS(spt_load(spec, -0.1), std::runtime_error);
  CHECK_THROWS_AS(spt_load(spec, 2.5), std::runtime_error);
  CHECK(thrown_message([&] { spt_load(spec, 2.5); }).find("outside") != std::string::npos);
}

TEST_CASE("spt_load is strictly increasing in displacement") {
  Rng rng(23);
  for (int i = 0; i < 100; ++i) {
    MaterialSpec spec = sample_material(rng, i % 2 ? Split::train : Split::test);
    double prev = 0.0;
    for (int j = 1; j <= 50; ++j) {
      const double p = spt_load(spec, 2.0 * j / 50.0);
      CHECK(p > prev);
      prev = p;
    }
  }
}

TEST_CASE("doubling the yield stress never lowers the load") {
  Rng rng(24);
  for (int i = 0; i < 25; ++i) {
    MaterialSpec spec = sample_material(rng, Split::train);
    MaterialSpec doubled = spec;
    doubled.sigma_y = 2.0 * spec.sigma_y;
    for (int j = 1; j <= 20; ++j) {
      const double d = 2.0 * j / 20.0;
      CHECK(spt_load(doubled, d) >= spt_load(spec, d));
    }
  }
}

TEST_CASE("sample_material respects its declared ranges") {
  Rng rng(42);
  const MaterialSpec first = sample_material(rng, Split::train);
  Rng rng_again(42);
  CHECK(sample_material(rng_again, Split::train) == first);

  Rng sweep(25);
  double sy_lo = 1e18, sy_hi = -1e18, n_lo = 1e18, n_hi = -1e18, t_lo = 1e18, t_hi = -1e18;
  for (int i = 0; i < 10000; ++i) {
    const MaterialSpec s = sample_material(sweep, Split::train);
    CHECK(s.sigma_y >= ranges::kSigmaYTrainLo);
    CHECK(s.sigma_y <= ranges::kSigmaYTrainHi);
    CHECK(s.n >= ranges::kNLo);
    CHECK(s.n <= ranges::kNHi);
    CHECK(s.t >= ranges::kTLo);
    CHECK(s.t <= ranges::kTHi);
    CHECK(s.e_mod == 70000.0);
    CHECK(s.nu == 0.35);
    sy_lo = std::min(sy_lo, s.sigma_y);
    sy_hi = std::max(sy_hi, s.sigma_y);
    n_lo = std::min(n_lo, s.n);
    n_hi = std::max(n_hi, s.n);
    t_lo = std::min(t_lo, s.t);
    t_hi = std::max(t_hi, s.t);
  }
  // log-uniform/uniform draws should visit most of each range in 1e4 tries
  CHECK(sy_lo < 2.0 * ranges::kSigmaYTrainLo);
  CHECK(sy_hi > 0.5 * ranges::kSigmaYTrainHi);
  CHECK(n_lo < ranges::kNLo + 0.02);
  CHECK(n_hi > ranges::kNHi - 0.02);
  CHECK(t_lo < 1.1);
  CHECK(t_hi > 3.9);

  Rng test_rng(26);
  for (int i = 0; i < 2000; ++i) {
    const MaterialSpec s = sample_material(test_rng, Split::test);
    CHECK(s.sigma_y >= ranges::kSigmaYTestLo);
    CHECK(s.sigma_y <= ranges::kSigmaYTestHi);
  }
}

TEST_CASE("make_curve evaluates both curves on uniform grids") {
  MaterialSpec spec;
  spec.sigma_y = 300.0;
  spec.n = 0.15;
  spec.t = 1.5;
  GridConfig grid;
  const CurvePair pair = make_curve(spec, grid);

  REQUIRE(pair.load.size() == 64);
  REQUIRE(pair.stress.size() == 64);
  CHECK(pair.displacement_grid.front() == 0.0);
  CHECK(pair.displacement_grid.back() == doctest::Approx(2.0));
  CHECK(pair.strain_grid.back() == doctest::Approx(0.25));
  CHECK(pair.load.front() == 0.0);
  CHECK(pair.stress.front() == 0.0);
  for (std::size_t i = 0; i < pair.load.size(); ++i) {
    CHECK(pair.load[i] == spt_load(spec, pair.displacement_grid[i]));
    CHECK(pair.stress[i] == flow_stress(spec, pair.strain_grid[i]));
  }
}

TEST_CASE("generate_dataset determinism and properties") {
  GridConfig grid;
  grid.l_in = 16;
  grid.l_out = 16;
  auto [train1, test1] = generate_dataset(10, 4, 123, grid);
  auto [train2, test2] = generate_dataset(10, 4, 123, grid);

  REQUIRE(train1.samples.size() == 10);
  REQUIRE(test1.samples.size() == 4);
  CHECK(train1.samples == train2.samples);
  CHECK(test1.samples == test2.samples);
  CHECK(train1.norm_stats == test1.norm_stats);  // both carry the train stats

  for (const CurvePair& p : train1.samples) {
    for (std::size_t i = 1; i < p.load.size(); ++i) CHECK(p.load[i] > p.load[i - 1]);
    for (std::size_t i = 1; i < p.stress.size(); ++i) CHECK(p.stress[i] >= p.stress[i - 1]);
  }

  // norm stats bound every training value
  for (const CurvePair& p : train1.samples) {
    for (double v : p.load) {
      CHECK(v >= train1.norm_stats.load_min);
      CHECK(v <= train1.norm_stats.load_max);
    }
    for (double v : p.stress) {
      CHECK(v >= train1.norm_stats.stress_min);
      CHECK(v <= train1.norm_stats.stress_max);
    }
  }

  CHECK_THROWS_AS(generate_dataset(0, 1, 1, grid), std::runtime_error);
  GridConfig tiny = grid;
  tiny.l_in = 4;
  CHECK_THROWS_AS(generate_dataset(1, 1, 1, tiny), std::runtime_error);
}

TEST_CASE("csv round trip is exact") {
  GridConfig grid;
  grid.l_in = 12;
  grid.l_out = 9;
  auto [train, test] = generate_dataset(3, 1, 77, grid);

  const std::string path = temp_path("spt2ss_mat_roundtrip.csv");
  write_csv(train, path);
  const Dataset back = read_csv(path, grid, Split::train);
  REQUIRE(back.samples.size() == 3);
  CHECK(back.samples == train.samples);
  CHECK(back.norm_stats == train.norm_stats);

  // same bytes when written twice
  const std::string again = temp_path("spt2ss_mat_roundtrip2.csv");
  write_csv(back, again);
  CHECK(slurp(path) == slurp(again));
  std::remove(path.c_str());
  std::remove(again.c_str());
}

TEST_CASE("larger csv round trip preserves norm stats") {
  GridConfig grid;
  grid.l_in = 24;
  grid.l_out = 24;
  auto [train, test] = generate_dataset(200, 1, 5, grid);
  const std::string path = temp_path("spt2ss_mat_big.csv");
  write_csv(train, path);
  const Dataset back = read_csv(path, grid, Split::train);
  CHECK(back.norm_stats == train.norm_stats);
  std::remove(path.c_str());
}

TEST_CASE("read_csv rejects malformed input with precise positions") {
  const std::string path = temp_path("spt2ss_mat_bad.csv");

  {
    std::ofstream f(path);
    f << "id,sigma_y,n,t,load_0,load_1,stress_0\n";
    f << "0,500,0.2,2,1,2,3\n";
    f << "1,500,0.2,2,1,2\n";  // one field short
  }
  const std::string msg = thrown_message([&] { read_csv(path); });
  CHECK(msg.find(":3:") != std::string::npos);
  CHECK(msg.find("expected 7") != std::string::npos);
  CHECK(msg.find("found 6") != std::string::npos);

  {
    std::ofstream f(path);
    f << "id,sigma_y,n,load_0,stress_0\n";  // t missing
    f << "0,500,0.2,1,3\n";
  }
  CHECK(thrown_message([&] { read_csv(path); }).find("column 't'") != std::string::npos);

  {
    std::ofstream f(path);
    f << "id,sigma_y,n\n";  // header stops before t
    f << "0,500,0.2\n";
  }
  CHECK(thrown_message([&] { read_csv(path); }).find("missing column 't'") != std::string::npos);

  {
    std::ofstream f(path);
    f << "id,sigma_y,n,t,stress_0\n";  // no load block
    f << "0,500,0.2,2,3\n";
  }
  CHECK(thrown_message([&] { read_csv(path); }).find("'load_0'") != std::string::npos);

  CHECK_THROWS_AS(read_csv(temp_path("spt2ss_nonexistent.csv")), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("normalization helpers map the training bounds onto [0,1]") {
  NormStats s;
  s.load_min = 10.0;
  s.load_max = 110.0;
  s.stress_min = 5.0;
  s.stress_max = 25.0;
  CHECK(norm_load(10.0, s) == 0.0);
  CHECK(norm_load(110.0, s) == 1.0);
  CHECK(norm_load(60.0, s) == doctest::Approx(0.5));
  CHECK(norm_stress(15.0, s) == doctest::Approx(0.5));
  CHECK(denorm_stress(norm_stress(17.3, s), s) == doctest::Approx(17.3).epsilon(1e-12));
}
