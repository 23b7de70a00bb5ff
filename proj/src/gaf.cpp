#include "spt2ss/gaf.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace spt2ss {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

}  // namespace

GafImage gaf_transform(const std::vector<double>& d, GafMode mode) {
  const int n = static_cast<int>(d.size());
  if (n < 2) fail("gaf_transform: need at least 2 values, got " + std::to_string(n));
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(d[static_cast<std::size_t>(i)])) {
      fail("gaf_transform: non-finite value at index " + std::to_string(i));
    }
  }
  GafImage img;
  img.size = n;
  img.data_min = *std::min_element(d.begin(), d.end());
  img.data_max = *std::max_element(d.begin(), d.end());
  const double span = img.data_max - img.data_min;

  std::vector<double> x(static_cast<std::size_t>(n));
  if (span < 1e-12) {
    if (mode == GafMode::strict) {
      fail("gaf_transform: constant sequence (span " + std::to_string(span) +
           "), undefined under min-max scaling");
    }
    std::fill(x.begin(), x.end(), 0.5);
  } else {
    for (int i = 0; i < n; ++i) {
      const double v = (d[static_cast<std::size_t>(i)] - img.data_min) / span;
      x[static_cast<std::size_t>(i)] = std::clamp(v, 0.0, 1.0);
    }
  }

  img.theta.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    img.theta[static_cast<std::size_t>(i)] = std::acos(x[static_cast<std::size_t>(i)]);
  }

  img.g.resize(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double v = std::cos(img.theta[static_cast<std::size_t>(i)] +
                                img.theta[static_cast<std::size_t>(j)]);
      img.g[static_cast<std::size_t>(i) * n + j] = v;
      img.g[static_cast<std::size_t>(j) * n + i] = v;
    }
  }
  return img;
}

void export_pgm(const GafImage& img, const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) fail("export_pgm: cannot open " + path);
  file << "P5\n" << img.size << ' ' << img.size << "\n255\n";
  std::vector<unsigned char> pixels(img.g.size());
  for (std::size_t i = 0; i < img.g.size(); ++i) {
    const double scaled = (img.g[i] + 1.0) * 127.5;
    const double rounded = std::floor(scaled + 0.5);  // half rounds up
    pixels[i] = static_cast<unsigned char>(std::clamp(rounded, 0.0, 255.0));
  }
  file.write(reinterpret_cast<const char*>(pixels.data()),
             static_cast<std::streamsize>(pixels.size()));
  if (!file.flush()) fail("export_pgm: write failed for " + path);
}

void export_gaf_csv(const GafImage& img, const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) fail("export_gaf_csv: cannot open " + path);
  char buf[32];
  for (int i = 0; i < img.size; ++i) {
    for (int j = 0; j < img.size; ++j) {
      const double v = img.g[static_cast<std::size_t>(i) * img.size + j];
      const auto res = std::to_chars(buf, buf + sizeof(buf), v);
      if (j) file << ',';
      file.write(buf, res.ptr - buf);
    }
    file << '\n';
  }
  if (!file.flush()) fail("export_gaf_csv: write failed for " + path);
}

}  // namespace spt2ss
