#include "spt2ss/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace spt2ss {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

double mae(const std::vector<double>& pred, const std::vector<double>& target) {
  if (pred.size() != target.size() || pred.empty()) {
    fail("mae: length mismatch (" + std::to_string(pred.size()) + " vs " +
         std::to_string(target.size()) + ")");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - target[i]);
  return sum / static_cast<double>(pred.size());
}

double r2(const std::vector<double>& pred, const std::vector<double>& target) {
  if (pred.size() != target.size() || pred.empty()) {
    fail("r2: length mismatch (" + std::to_string(pred.size()) + " vs " +
         std::to_string(target.size()) + ")");
  }
  double mean = 0.0;
  for (double t : target) mean += t;
  mean /= static_cast<double>(target.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ss_res += (pred[i] - target[i]) * (pred[i] - target[i]);
    ss_tot += (target[i] - mean) * (target[i] - mean);
  }
  if (ss_tot == 0.0) fail("r2: target has zero variance");
  return 1.0 - ss_res / ss_tot;
}

std::vector<std::vector<double>> predict_curves(const SptStressModel& model,
                                                const NormStats& stats,
                                                const std::vector<const CurvePair*>& samples) {
  constexpr int kChunk = 50;
  const int l_out = model.config().grid.l_out;
  std::vector<std::vector<double>> out;
  out.reserve(samples.size());
  NoGradGuard guard;
  Rng rng(0);  // never drawn from: inference has no dropout and no forcing coins
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    const std::size_t count = std::min<std::size_t>(kChunk, samples.size() - start);
    std::vector<const CurvePair*> chunk(samples.begin() + static_cast<std::ptrdiff_t>(start),
                                        samples.begin() +
                                            static_cast<std::ptrdiff_t>(start + count));
    BatchInput batch = make_batch(chunk, stats, model.config().gaf_enabled, false);
    Tensor pred = model.forward(batch, 0.0, false, rng);
    for (std::size_t b = 0; b < count; ++b) {
      std::vector<double> curve(static_cast<std::size_t>(l_out));
      for (int i = 0; i < l_out; ++i) {
        curve[static_cast<std::size_t>(i)] =
            denorm_stress(pred.data()[static_cast<Eigen::Index>(b) * l_out + i], stats);
      }
      out.push_back(std::move(curve));
    }
  }
  return out;
}

EvalReport evaluate_model(const SptStressModel& model, const NormStats& stats, const Dataset& ds,
                          const std::string& tag) {
  if (ds.samples.empty()) fail("evaluate: empty dataset");
  const GridConfig& grid = model.config().grid;
  const CurvePair& first = ds.samples.front();
  if (static_cast<int>(first.load.size()) != grid.l_in ||
      static_cast<int>(first.stress.size()) != grid.l_out) {
    fail("evaluate: dataset sequences " + std::to_string(first.load.size()) + "/" +
         std::to_string(first.stress.size()) + " do not match model grid " +
         std::to_string(grid.l_in) + "/" + std::to_string(grid.l_out));
  }
  std::vector<const CurvePair*> samples;
  samples.reserve(ds.samples.size());
  for (const CurvePair& p : ds.samples) samples.push_back(&p);
  const std::vector<std::vector<double>> preds = predict_curves(model, stats, samples);

  EvalReport report;
  report.model_tag = tag;
  report.per_sample_mae.reserve(samples.size());
  report.per_sample_r2.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    report.per_sample_mae.push_back(mae(preds[i], samples[i]->stress));
    report.per_sample_r2.push_back(r2(preds[i], samples[i]->stress));
  }
  const auto [mae_min, mae_max] =
      std::minmax_element(report.per_sample_mae.begin(), report.per_sample_mae.end());
  const auto [r2_min, r2_max] =
      std::minmax_element(report.per_sample_r2.begin(), report.per_sample_r2.end());
  report.min_mae = *mae_min;
  report.max_mae = *mae_max;
  report.min_r2 = *r2_min;
  report.max_r2 = *r2_max;
  return report;
}

EvalReport evaluate(const Checkpoint& ckpt, const Dataset& ds) {
  const SptStressModel model = model_from_checkpoint(ckpt);
  return evaluate_model(model, ckpt.norm_stats, ds,
                        ckpt.config.gaf_enabled ? "proposed" : "1d-baseline");
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json per_sample = nlohmann::json::array();
  for (std::size_t i = 0; i < report.per_sample_mae.size(); ++i) {
    per_sample.push_back(
        {{"mae_mpa", report.per_sample_mae[i]}, {"r2", report.per_sample_r2[i]}});
  }
  return nlohmann::json{{"model_tag", report.model_tag},
                        {"num_samples", report.per_sample_mae.size()},
                        {"max_mae_mpa", report.max_mae},
                        {"min_mae_mpa", report.min_mae},
                        {"max_r2", report.max_r2},
                        {"min_r2", report.min_r2},
                        {"per_sample", per_sample}};
}

void write_report_json(const EvalReport& report, const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) fail("write_report_json: cannot open " + path);
  file << report_to_json(report).dump(2) << '\n';
  if (!file.flush()) fail("write_report_json: write failed for " + path);
}

void emit_plot(const CurvePair& pair, const std::vector<double>& pred,
               const std::string& csv_path, const std::string& svg_path) {
  if (pred.size() != pair.stress.size() || pred.size() != pair.strain_grid.size()) {
    fail("emit_plot: prediction length " + std::to_string(pred.size()) +
         " does not match curve length " + std::to_string(pair.stress.size()));
  }
  {
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) fail("emit_plot: cannot open " + csv_path);
    csv << "strain,true_stress,pred_stress\n";
    for (std::size_t i = 0; i < pred.size(); ++i) {
      csv << fmt_double(pair.strain_grid[i]) << ',' << fmt_double(pair.stress[i]) << ','
          << fmt_double(pred[i]) << '\n';
    }
    if (!csv.flush()) fail("emit_plot: write failed for " + csv_path);
  }

  const double x_lo = pair.strain_grid.front();
  const double x_hi = pair.strain_grid.back();
  double y_lo = pair.stress.front(), y_hi = pair.stress.front();
  for (double v : pair.stress) {
    y_lo = std::min(y_lo, v);
    y_hi = std::max(y_hi, v);
  }
  for (double v : pred) {
    y_lo = std::min(y_lo, v);
    y_hi = std::max(y_hi, v);
  }
  const double x_span = x_hi > x_lo ? x_hi - x_lo : 1.0;
  const double y_span = y_hi > y_lo ? y_hi - y_lo : 1.0;
  // Plot area: x in [60, 620], y in [20, 440] with y growing downward.
  const auto px = [&](double x) { return 60.0 + (x - x_lo) / x_span * 560.0; };
  const auto py = [&](double y) { return 440.0 - (y - y_lo) / y_span * 420.0; };
  const auto polyline = [&](const std::vector<double>& ys) {
    std::string pts;
    for (std::size_t i = 0; i < ys.size(); ++i) {
      if (i) pts += ' ';
      pts += fmt_double(px(pair.strain_grid[i])) + ',' + fmt_double(py(ys[i]));
    }
    return pts;
  };

  std::ofstream svg(svg_path, std::ios::binary);
  if (!svg) fail("emit_plot: cannot open " + svg_path);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
         "viewBox=\"0 0 640 480\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"480\" fill=\"white\"/>\n"
      << "<line x1=\"60\" y1=\"440\" x2=\"620\" y2=\"440\" stroke=\"black\"/>\n"
      << "<line x1=\"60\" y1=\"20\" x2=\"60\" y2=\"440\" stroke=\"black\"/>\n"
      << "<text x=\"340\" y=\"472\" font-size=\"14\" text-anchor=\"middle\">true strain</text>\n"
      << "<text x=\"16\" y=\"230\" font-size=\"14\" text-anchor=\"middle\" "
         "transform=\"rotate(-90 16 230)\">true stress (MPa)</text>\n"
      << "<text x=\"60\" y=\"456\" font-size=\"12\" text-anchor=\"middle\">" << fmt_double(x_lo)
      << "</text>\n"
      << "<text x=\"620\" y=\"456\" font-size=\"12\" text-anchor=\"middle\">" << fmt_double(x_hi)
      << "</text>\n"
      << "<text x=\"54\" y=\"444\" font-size=\"12\" text-anchor=\"end\">" << fmt_double(y_lo)
      << "</text>\n"
      << "<text x=\"54\" y=\"26\" font-size=\"12\" text-anchor=\"end\">" << fmt_double(y_hi)
      << "</text>\n"
      << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\""
      << polyline(pair.stress) << "\"/>\n"
      << "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\" stroke-dasharray=\"6 3\" "
         "points=\"" << polyline(pred) << "\"/>\n"
      << "<rect x=\"470\" y=\"30\" width=\"140\" height=\"44\" fill=\"white\" "
         "stroke=\"black\"/>\n"
      << "<line x1=\"478\" y1=\"44\" x2=\"502\" y2=\"44\" stroke=\"#1f77b4\" "
         "stroke-width=\"2\"/>\n"
      << "<text x=\"508\" y=\"48\" font-size=\"12\">reference</text>\n"
      << "<line x1=\"478\" y1=\"62\" x2=\"502\" y2=\"62\" stroke=\"#d62728\" stroke-width=\"2\" "
         "stroke-dasharray=\"6 3\"/>\n"
      << "<text x=\"508\" y=\"66\" font-size=\"12\">predicted</text>\n"
      << "</svg>\n";
  if (!svg.flush()) fail("emit_plot: write failed for " + svg_path);
}

}  // namespace spt2ss
