#include "spt2ss/material.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string_view>

namespace spt2ss {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view field, const std::string& path, std::size_t line,
                    std::size_t col) {
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    fail(path + ":" + std::to_string(line) + ": field " + std::to_string(col + 1) +
         " is not a number: '" + std::string(field) + "'");
  }
  return v;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::vector<double> uniform_grid(int n, double hi) {
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = hi * i / (n - 1);
  return g;
}

}  // namespace

MaterialSpec sample_material(Rng& rng, Split split) {
  const bool train = split == Split::train;
  const double lo = train ? ranges::kSigmaYTrainLo : ranges::kSigmaYTestLo;
  const double hi = train ? ranges::kSigmaYTrainHi : ranges::kSigmaYTestHi;
  MaterialSpec spec;
  spec.sigma_y = rng.log_uniform(lo, hi);
  spec.n = rng.uniform(ranges::kNLo, ranges::kNHi);
  spec.t = rng.uniform(ranges::kTLo, ranges::kTHi);
  return spec;
}

double flow_stress(const MaterialSpec& spec, double eps) {
  if (eps < 0.0) fail("flow_stress: negative strain " + std::to_string(eps));
  const double eps_y = spec.sigma_y / spec.e_mod;
  if (eps <= eps_y) return spec.e_mod * eps;
  const double k = spec.sigma_y / std::pow(eps_y, spec.n);
  return k * std::pow(eps, spec.n);
}

double spt_load(const MaterialSpec& spec, double delta, double delta_max) {
  if (delta < 0.0 || delta > delta_max) {
    fail("spt_load: displacement " + std::to_string(delta) + " outside [0, " +
         std::to_string(delta_max) + "]");
  }
  if (delta == 0.0) return 0.0;
  const double eps_eq = 0.25 * std::pow(delta / spec.t, 1.4);
  return 2.0 * flow_stress(spec, eps_eq) * std::pow(spec.t, 1.5) * std::pow(delta, 0.8);
}

CurvePair make_curve(const MaterialSpec& spec, const GridConfig& grid) {
  CurvePair pair;
  pair.spec = spec;
  pair.displacement_grid = uniform_grid(grid.l_in, grid.delta_max);
  pair.strain_grid = uniform_grid(grid.l_out, grid.eps_max);
  pair.load.reserve(pair.displacement_grid.size());
  for (double d : pair.displacement_grid) pair.load.push_back(spt_load(spec, d, grid.delta_max));
  pair.stress.reserve(pair.strain_grid.size());
  for (double e : pair.strain_grid) pair.stress.push_back(flow_stress(spec, e));
  return pair;
}

NormStats compute_norm_stats(const std::vector<CurvePair>& samples) {
  if (samples.empty()) fail("compute_norm_stats: empty sample list");
  NormStats s;
  s.load_min = s.load_max = samples.front().load.front();
  s.stress_min = s.stress_max = samples.front().stress.front();
  for (const CurvePair& p : samples) {
    for (double v : p.load) {
      s.load_min = std::min(s.load_min, v);
      s.load_max = std::max(s.load_max, v);
    }
    for (double v : p.stress) {
      s.stress_min = std::min(s.stress_min, v);
      s.stress_max = std::max(s.stress_max, v);
    }
  }
  if (s.load_max <= s.load_min || s.stress_max <= s.stress_min) {
    fail("compute_norm_stats: degenerate value range");
  }
  return s;
}

std::pair<Dataset, Dataset> generate_dataset(int n_train, int n_test, std::uint64_t seed,
                                             const GridConfig& grid) {
  if (n_train < 1 || n_test < 1) fail("generate_dataset: split sizes must be at least 1");
  if (grid.l_in < 8 || grid.l_out < 8) fail("generate_dataset: sequence lengths must be >= 8");
  Rng root(seed);
  Dataset train;
  train.split = Split::train;
  train.seed = seed;
  train.samples.reserve(static_cast<std::size_t>(n_train));
  for (int i = 0; i < n_train; ++i) {
    Rng child = root.split(static_cast<std::uint64_t>(i));
    train.samples.push_back(make_curve(sample_material(child, Split::train), grid));
  }
  Dataset test;
  test.split = Split::test;
  test.seed = seed;
  test.samples.reserve(static_cast<std::size_t>(n_test));
  for (int i = 0; i < n_test; ++i) {
    Rng child = root.split(static_cast<std::uint64_t>(n_train + i));
    test.samples.push_back(make_curve(sample_material(child, Split::test), grid));
  }
  train.norm_stats = compute_norm_stats(train.samples);
  test.norm_stats = train.norm_stats;
  return {std::move(train), std::move(test)};
}

void write_csv(const Dataset& ds, const std::string& path) {
  if (ds.samples.empty()) fail("write_csv: empty dataset");
  const std::size_t l_in = ds.samples.front().load.size();
  const std::size_t l_out = ds.samples.front().stress.size();
  std::ostringstream out;
  out << "id,sigma_y,n,t";
  for (std::size_t i = 0; i < l_in; ++i) out << ",load_" << i;
  for (std::size_t i = 0; i < l_out; ++i) out << ",stress_" << i;
  out << '\n';
  for (std::size_t id = 0; id < ds.samples.size(); ++id) {
    const CurvePair& p = ds.samples[id];
    if (p.load.size() != l_in || p.stress.size() != l_out) {
      fail("write_csv: sample " + std::to_string(id) + " has inconsistent sequence lengths");
    }
    out << id << ',' << fmt_double(p.spec.sigma_y) << ',' << fmt_double(p.spec.n) << ','
        << fmt_double(p.spec.t);
    for (double v : p.load) out << ',' << fmt_double(v);
    for (double v : p.stress) out << ',' << fmt_double(v);
    out << '\n';
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) fail("write_csv: cannot open " + path);
  file << out.str();
  if (!file.flush()) fail("write_csv: write failed for " + path);
}

Dataset read_csv(const std::string& path, const GridConfig& grid, Split split) {
  std::ifstream file(path, std::ios::binary);
  if (!file) fail("read_csv: cannot open " + path);
  std::string line;
  if (!std::getline(file, line)) fail("read_csv: " + path + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  // Fixed columns first, then contiguous load_0.. and stress_0.. runs whose
  // lengths define the sequence sizes of the file.
  const std::vector<std::string_view> header = split_fields(line);
  const std::vector<std::string> fixed = {"id", "sigma_y", "n", "t"};
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    if (i >= header.size()) fail(path + ":1: missing column '" + fixed[i] + "'");
    if (header[i] != fixed[i]) {
      fail(path + ":1: expected column '" + fixed[i] + "' at position " + std::to_string(i) +
           ", found '" + std::string(header[i]) + "'");
    }
  }
  std::size_t pos = fixed.size();
  int l_in = 0;
  while (pos < header.size() && header[pos] == "load_" + std::to_string(l_in)) {
    ++l_in;
    ++pos;
  }
  if (l_in == 0) fail(path + ":1: missing column 'load_0'");
  int l_out = 0;
  while (pos < header.size() && header[pos] == "stress_" + std::to_string(l_out)) {
    ++l_out;
    ++pos;
  }
  if (l_out == 0) fail(path + ":1: missing column 'stress_0'");
  if (pos != header.size()) {
    fail(path + ":1: unexpected column '" + std::string(header[pos]) + "' at position " +
         std::to_string(pos));
  }

  Dataset ds;
  ds.split = split;
  const std::vector<double> dgrid = uniform_grid(l_in, grid.delta_max);
  const std::vector<double> sgrid = uniform_grid(l_out, grid.eps_max);
  const std::size_t n_fields = fixed.size() + static_cast<std::size_t>(l_in) +
                               static_cast<std::size_t>(l_out);
  std::size_t line_no = 1;
  while (std::getline(file, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string_view> fields = split_fields(line);
    if (fields.size() != n_fields) {
      fail(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(n_fields) +
           " fields, found " + std::to_string(fields.size()));
    }
    CurvePair p;
    parse_double(fields[0], path, line_no, 0);  // id is positional, value unused
    p.spec.sigma_y = parse_double(fields[1], path, line_no, 1);
    p.spec.n = parse_double(fields[2], path, line_no, 2);
    p.spec.t = parse_double(fields[3], path, line_no, 3);
    p.displacement_grid = dgrid;
    p.strain_grid = sgrid;
    p.load.resize(static_cast<std::size_t>(l_in));
    p.stress.resize(static_cast<std::size_t>(l_out));
    std::size_t col = 4;
    for (int i = 0; i < l_in; ++i, ++col) {
      p.load[static_cast<std::size_t>(i)] = parse_double(fields[col], path, line_no, col);
    }
    for (int i = 0; i < l_out; ++i, ++col) {
      p.stress[static_cast<std::size_t>(i)] = parse_double(fields[col], path, line_no, col);
    }
    ds.samples.push_back(std::move(p));
  }
  if (ds.samples.empty()) fail("read_csv: " + path + " contains no data rows");
  ds.norm_stats = compute_norm_stats(ds.samples);
  return ds;
}

}  // namespace spt2ss
