#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "spt2ss/material.hpp"
#include "spt2ss/model.hpp"
#include "spt2ss/trainer.hpp"

namespace spt2ss {

/// Mean absolute error between two equal-length curves (MPa in, MPa out).
double mae(const std::vector<double>& pred, const std::vector<double>& target);

/// Coefficient of determination, 1 - SS_res/SS_tot about the target mean.
/// Negative when the prediction is worse than predicting the mean. Rejects
/// targets with zero variance.
double r2(const std::vector<double>& pred, const std::vector<double>& target);

/// Per-curve metrics and their extremes over a dataset.
struct EvalReport {
  std::string model_tag;  // "proposed" or "1d-baseline"
  std::vector<double> per_sample_mae;  // MPa
  std::vector<double> per_sample_r2;
  double max_mae = 0.0;
  double min_mae = 0.0;
  double max_r2 = 0.0;
  double min_r2 = 0.0;
};

/// Autoregressive inference (no teacher forcing, no dropout, no graph), in
/// chunks. Returns one denormalized stress curve per sample.
std::vector<std::vector<double>> predict_curves(const SptStressModel& model,
                                                const NormStats& stats,
                                                const std::vector<const CurvePair*>& samples);

/// Per-sample metrics for `model` over `ds`, aggregated into the report.
/// Normalization comes from `stats` (a checkpoint's stored bounds), never
/// from the evaluated dataset.
EvalReport evaluate_model(const SptStressModel& model, const NormStats& stats, const Dataset& ds,
                          const std::string& tag);

/// Rebuilds the checkpoint's model and evaluates it. The dataset's sequence
/// lengths must match the checkpoint grid.
EvalReport evaluate(const Checkpoint& ckpt, const Dataset& ds);

nlohmann::json report_to_json(const EvalReport& report);
void write_report_json(const EvalReport& report, const std::string& path);

/// Overlay artifacts for one specimen: a CSV (strain, true_stress,
/// pred_stress) and a self-contained SVG line chart. Byte-deterministic for
/// identical inputs.
void emit_plot(const CurvePair& pair, const std::vector<double>& pred,
               const std::string& csv_path, const std::string& svg_path);

}  // namespace spt2ss
