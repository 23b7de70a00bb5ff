#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spt2ss/material.hpp"
#include "spt2ss/model.hpp"

namespace spt2ss {

enum class LossKind { mse, mae };

std::string loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(const std::string& name);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double teacher_forcing_ratio = 0.5;
  std::uint64_t seed = 0;
  int hidden_size = 128;
  int num_layers = 5;
  int num_heads = 4;
  double dropout = 0.1;
  bool attn_exact = false;  // literal single-head attention, no projections
  bool gaf_enabled = true;  // off = 1-D baseline (no image branch)
  LossKind loss_kind = LossKind::mse;
  double clip_norm = 5.0;  // global gradient norm ceiling

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Everything needed to rebuild a trained model: full config, grid, the
/// training split's normalization bounds, and the named parameters. `params`
/// aliases the live model tensors when produced by train()/make_checkpoint,
/// and holds freshly loaded values after load_checkpoint.
struct Checkpoint {
  TrainConfig config;
  GridConfig grid;
  NormStats norm_stats;
  int final_epoch = 0;
  double final_loss = 0.0;
  ParamList params;
};

/// Per-step criterion accumulated over the output sequence, then averaged
/// over steps; each step's criterion is a batch mean. Equals the whole-
/// tensor mean criterion up to rounding.
Tensor sequence_loss(const Tensor& pred, const Tensor& target, LossKind kind);

ModelConfig model_config(const TrainConfig& cfg, const GridConfig& grid);

/// Grid parameters implied by a dataset's sample curves.
GridConfig grid_of(const Dataset& ds);

struct TrainResult {
  SptStressModel model;
  Checkpoint checkpoint;  // params alias the model
  std::vector<double> loss_history;  // one mean loss per epoch
};

/// Runs the full training loop: per epoch a seeded shuffle, then per batch
/// forward (teacher-forced), backward, gradient clipping, one Adam step.
/// Deterministic for a fixed config and seed. A non-finite loss aborts with
/// epoch/batch/parameter diagnostics. `on_epoch` (optional) observes each
/// 1-based epoch index and its mean loss.
TrainResult train(const Dataset& train_ds, const TrainConfig& cfg,
                  const std::function<void(int, double)>& on_epoch = {});

Checkpoint make_checkpoint(const SptStressModel& model, const TrainConfig& cfg,
                           const NormStats& stats, int final_epoch, double final_loss);

/// Binary layout: 8-byte magic "SPT2SS01", little-endian u32 metadata
/// length, UTF-8 JSON metadata (config, grid, norm stats, parameter names
/// and shapes in order, final epoch/loss), then every parameter's values as
/// little-endian IEEE-754 single precision in metadata order.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

/// Rejects bad magic, malformed metadata, and payload size mismatches, each
/// with a specific message.
Checkpoint load_checkpoint(const std::string& path);

/// Builds a model with the checkpoint's architecture and copies the stored
/// parameter values into it (names and shapes must match exactly).
SptStressModel model_from_checkpoint(const Checkpoint& ckpt);

/// CSV with header `epoch,mean_loss`, epochs 1-based.
void write_loss_history(const std::vector<double>& history, const std::string& path);

/// JSON bindings (the checkpoint metadata encoding, reused by artifact
/// sidecars).
void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);
void to_json(nlohmann::json& j, const GridConfig& grid);
void from_json(const nlohmann::json& j, GridConfig& grid);
void to_json(nlohmann::json& j, const NormStats& stats);
void from_json(const nlohmann::json& j, NormStats& stats);

}  // namespace spt2ss
