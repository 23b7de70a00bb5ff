#include "spt2ss/trainer.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "spt2ss/adam.hpp"
#include "spt2ss/ops.hpp"

namespace spt2ss {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) fail("train config: epochs must be >= 1");
  if (cfg.batch_size < 1) fail("train config: batch size must be >= 1");
  if (!(cfg.lr > 0.0)) fail("train config: learning rate must be positive");
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0) {
    fail("train config: betas must be in [0, 1)");
  }
  if (!(cfg.eps > 0.0)) fail("train config: eps must be positive");
  if (cfg.teacher_forcing_ratio < 0.0 || cfg.teacher_forcing_ratio > 1.0) {
    fail("train config: teacher forcing ratio must be in [0, 1]");
  }
  if (cfg.hidden_size < 1 || cfg.num_layers < 1 || cfg.num_heads < 1) {
    fail("train config: sizes must be positive");
  }
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) fail("train config: dropout must be in [0, 1)");
  if (!(cfg.clip_norm > 0.0)) fail("train config: clip norm must be positive");
}

constexpr char kMagic[8] = {'S', 'P', 'T', '2', 'S', 'S', '0', '1'};

}  // namespace

void to_json(json& j, const TrainConfig& cfg) {
  j = json{{"epochs", cfg.epochs},
           {"batch_size", cfg.batch_size},
           {"lr", cfg.lr},
           {"beta1", cfg.beta1},
           {"beta2", cfg.beta2},
           {"eps", cfg.eps},
           {"teacher_forcing_ratio", cfg.teacher_forcing_ratio},
           {"seed", cfg.seed},
           {"hidden_size", cfg.hidden_size},
           {"num_layers", cfg.num_layers},
           {"num_heads", cfg.num_heads},
           {"dropout", cfg.dropout},
           {"attn_exact", cfg.attn_exact},
           {"gaf_enabled", cfg.gaf_enabled},
           {"loss_kind", loss_kind_name(cfg.loss_kind)},
           {"clip_norm", cfg.clip_norm}};
}

void from_json(const json& j, TrainConfig& cfg) {
  cfg.epochs = j.at("epochs").get<int>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.lr = j.at("lr").get<double>();
  cfg.beta1 = j.at("beta1").get<double>();
  cfg.beta2 = j.at("beta2").get<double>();
  cfg.eps = j.at("eps").get<double>();
  cfg.teacher_forcing_ratio = j.at("teacher_forcing_ratio").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.hidden_size = j.at("hidden_size").get<int>();
  cfg.num_layers = j.at("num_layers").get<int>();
  cfg.num_heads = j.at("num_heads").get<int>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.attn_exact = j.at("attn_exact").get<bool>();
  cfg.gaf_enabled = j.at("gaf_enabled").get<bool>();
  cfg.loss_kind = loss_kind_from_name(j.at("loss_kind").get<std::string>());
  cfg.clip_norm = j.at("clip_norm").get<double>();
}

void to_json(json& j, const GridConfig& grid) {
  j = json{{"l_in", grid.l_in},
           {"l_out", grid.l_out},
           {"delta_max", grid.delta_max},
           {"eps_max", grid.eps_max}};
}

void from_json(const json& j, GridConfig& grid) {
  grid.l_in = j.at("l_in").get<int>();
  grid.l_out = j.at("l_out").get<int>();
  grid.delta_max = j.at("delta_max").get<double>();
  grid.eps_max = j.at("eps_max").get<double>();
}

void to_json(json& j, const NormStats& stats) {
  j = json{{"load_min", stats.load_min},
           {"load_max", stats.load_max},
           {"stress_min", stats.stress_min},
           {"stress_max", stats.stress_max}};
}

void from_json(const json& j, NormStats& stats) {
  stats.load_min = j.at("load_min").get<double>();
  stats.load_max = j.at("load_max").get<double>();
  stats.stress_min = j.at("stress_min").get<double>();
  stats.stress_max = j.at("stress_max").get<double>();
}

std::string loss_kind_name(LossKind kind) { return kind == LossKind::mse ? "mse" : "mae"; }

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "mse") return LossKind::mse;
  if (name == "mae") return LossKind::mae;
  fail("unknown loss kind '" + name + "' (expected mse or mae)");
}

Tensor sequence_loss(const Tensor& pred, const Tensor& target, LossKind kind) {
  if (pred.ndim() != 2 || !same_shape(pred.shape(), target.shape())) {
    fail("sequence_loss: prediction " + shape_str(pred.shape()) + " vs target " +
         shape_str(target.shape()));
  }
  const int l = pred.dim(1);
  Tensor acc;
  for (int t = 0; t < l; ++t) {
    Tensor diff = sub(slice_last(pred, t, 1), slice_last(target, t, 1));
    Tensor step = kind == LossKind::mse ? mean(mul(diff, diff)) : mean(abs(diff));
    acc = t == 0 ? step : add(acc, step);
  }
  return mul(acc, 1.0 / static_cast<double>(l));
}

ModelConfig model_config(const TrainConfig& cfg, const GridConfig& grid) {
  ModelConfig mc;
  mc.grid = grid;
  mc.hidden_size = cfg.hidden_size;
  mc.num_layers = cfg.num_layers;
  mc.num_heads = cfg.num_heads;
  mc.dropout = cfg.dropout;
  mc.attn_exact = cfg.attn_exact;
  mc.gaf_enabled = cfg.gaf_enabled;
  return mc;
}

GridConfig grid_of(const Dataset& ds) {
  if (ds.samples.empty()) fail("grid_of: empty dataset");
  const CurvePair& p = ds.samples.front();
  GridConfig grid;
  grid.l_in = static_cast<int>(p.load.size());
  grid.l_out = static_cast<int>(p.stress.size());
  grid.delta_max = p.displacement_grid.empty() ? 0.0 : p.displacement_grid.back();
  grid.eps_max = p.strain_grid.empty() ? 0.0 : p.strain_grid.back();
  return grid;
}

TrainResult train(const Dataset& train_ds, const TrainConfig& cfg,
                  const std::function<void(int, double)>& on_epoch) {
  validate(cfg);
  if (train_ds.samples.empty()) fail("train: empty dataset");
  const GridConfig grid = grid_of(train_ds);
  const NormStats stats = train_ds.norm_stats;
  const int n = static_cast<int>(train_ds.samples.size());

  Rng root(cfg.seed);
  Rng init_rng = root.split(0);
  SptStressModel model(model_config(cfg, grid), init_rng);
  ParamList named = model.params();
  std::vector<Tensor> tensors = tensors_of(named);
  Adam adam(tensors, {cfg.lr, cfg.beta1, cfg.beta2, cfg.eps});

  std::vector<int> indices(static_cast<std::size_t>(n));
  std::iota(indices.begin(), indices.end(), 0);
  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(cfg.epochs));

  for (int e = 0; e < cfg.epochs; ++e) {
    Rng epoch_rng = root.split(1 + static_cast<std::uint64_t>(e));
    epoch_rng.shuffle(indices.begin(), indices.end());
    double epoch_sum = 0.0;
    int batch_index = 0;
    for (int start = 0; start < n; start += cfg.batch_size, ++batch_index) {
      const int count = std::min(cfg.batch_size, n - start);
      std::vector<const CurvePair*> samples;
      samples.reserve(static_cast<std::size_t>(count));
      for (int i = 0; i < count; ++i) {
        samples.push_back(&train_ds.samples[static_cast<std::size_t>(
            indices[static_cast<std::size_t>(start + i)])]);
      }
      BatchInput batch = make_batch(samples, stats, cfg.gaf_enabled, true);
      Rng batch_rng = epoch_rng.split(static_cast<std::uint64_t>(batch_index));
      Tensor pred = model.forward(batch, cfg.teacher_forcing_ratio, true, batch_rng);
      Tensor loss = sequence_loss(pred, batch.target_norm, cfg.loss_kind);
      const double loss_value = loss.value();
      if (!std::isfinite(loss_value)) {
        std::string culprit = "none (loss only)";
        for (const NamedParam& p : named) {
          if (!p.tensor.data().isFinite().all()) {
            culprit = p.name;
            break;
          }
        }
        fail("train: non-finite loss at epoch " + std::to_string(e + 1) + ", batch " +
             std::to_string(batch_index + 1) +
             "; first parameter with non-finite values: " + culprit);
      }
      loss.backward();
      clip_global_norm(tensors, cfg.clip_norm);
      adam.step();
      adam.zero_grad();
      epoch_sum += loss_value * count;
    }
    history.push_back(epoch_sum / n);
    if (on_epoch) on_epoch(e + 1, history.back());
  }

  TrainResult result{std::move(model), Checkpoint{}, std::move(history)};
  result.checkpoint = make_checkpoint(result.model, cfg, stats, cfg.epochs,
                                      result.loss_history.back());
  return result;
}

Checkpoint make_checkpoint(const SptStressModel& model, const TrainConfig& cfg,
                           const NormStats& stats, int final_epoch, double final_loss) {
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.grid = model.config().grid;
  ckpt.norm_stats = stats;
  ckpt.final_epoch = final_epoch;
  ckpt.final_loss = final_loss;
  ckpt.params = model.params();
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json params = json::array();
  std::int64_t total = 0;
  for (const NamedParam& p : ckpt.params) {
    params.push_back({{"name", p.name}, {"shape", p.tensor.shape()}});
    total += p.tensor.size();
  }
  const json meta{{"config", json(ckpt.config)},
                  {"grid", json(ckpt.grid)},
                  {"norm_stats", json(ckpt.norm_stats)},
                  {"final_epoch", ckpt.final_epoch},
                  {"final_loss", ckpt.final_loss},
                  {"params", params}};
  const std::string meta_str = meta.dump();
  if (meta_str.size() > 0xFFFFFFFFull) fail("save_checkpoint: metadata too large");

  std::ofstream file(path, std::ios::binary);
  if (!file) fail("save_checkpoint: cannot open " + path);
  file.write(kMagic, sizeof(kMagic));
  const std::uint32_t len = static_cast<std::uint32_t>(meta_str.size());
  unsigned char len_le[4] = {static_cast<unsigned char>(len & 0xFF),
                             static_cast<unsigned char>((len >> 8) & 0xFF),
                             static_cast<unsigned char>((len >> 16) & 0xFF),
                             static_cast<unsigned char>((len >> 24) & 0xFF)};
  file.write(reinterpret_cast<const char*>(len_le), 4);
  file.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));

  std::vector<float> payload;
  payload.reserve(static_cast<std::size_t>(total));
  for (const NamedParam& p : ckpt.params) {
    for (Eigen::Index i = 0; i < p.tensor.size(); ++i) {
      payload.push_back(static_cast<float>(p.tensor.data()[i]));
    }
  }
  file.write(reinterpret_cast<const char*>(payload.data()),
             static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!file.flush()) fail("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) fail("load_checkpoint: cannot open " + path);
  std::ostringstream buf;
  buf << file.rdbuf();
  const std::string bytes = buf.str();

  if (bytes.size() < sizeof(kMagic) + 4) fail("load_checkpoint: file too short");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    fail("load_checkpoint: bad magic or unsupported version in " + path);
  }
  std::uint32_t len = 0;
  for (int i = 3; i >= 0; --i) {
    len = (len << 8) | static_cast<unsigned char>(bytes[sizeof(kMagic) + i]);
  }
  const std::size_t meta_start = sizeof(kMagic) + 4;
  if (bytes.size() < meta_start + len) fail("load_checkpoint: truncated metadata");

  json meta;
  try {
    meta = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(meta_start),
                       bytes.begin() + static_cast<std::ptrdiff_t>(meta_start + len));
  } catch (const json::exception& e) {
    fail(std::string("load_checkpoint: malformed metadata: ") + e.what());
  }

  Checkpoint ckpt;
  try {
    ckpt.config = meta.at("config").get<TrainConfig>();
    ckpt.grid = meta.at("grid").get<GridConfig>();
    ckpt.norm_stats = meta.at("norm_stats").get<NormStats>();
    ckpt.final_epoch = meta.at("final_epoch").get<int>();
    ckpt.final_loss = meta.at("final_loss").get<double>();
  } catch (const json::exception& e) {
    fail(std::string("load_checkpoint: missing or mistyped metadata field: ") + e.what());
  }

  std::int64_t total = 0;
  std::vector<std::pair<std::string, Shape>> entries;
  for (const json& p : meta.at("params")) {
    std::pair<std::string, Shape> entry;
    try {
      entry.first = p.at("name").get<std::string>();
      entry.second = p.at("shape").get<Shape>();
    } catch (const json::exception& e) {
      fail(std::string("load_checkpoint: malformed parameter entry: ") + e.what());
    }
    total += shape_numel(entry.second);
    entries.push_back(std::move(entry));
  }
  const std::size_t expected = static_cast<std::size_t>(total) * sizeof(float);
  const std::size_t actual = bytes.size() - meta_start - len;
  if (actual != expected) {
    fail("load_checkpoint: payload size mismatch: expected " + std::to_string(expected) +
         " bytes, found " + std::to_string(actual));
  }

  const char* cursor = bytes.data() + meta_start + len;
  for (auto& [name, shape] : entries) {
    const Eigen::Index count = shape_numel(shape);
    Eigen::ArrayXd data(count);
    for (Eigen::Index i = 0; i < count; ++i) {
      float v;
      std::memcpy(&v, cursor, sizeof(float));
      cursor += sizeof(float);
      data[i] = static_cast<double>(v);
    }
    ckpt.params.push_back({std::move(name), Tensor::from_data(shape, std::move(data), true)});
  }
  return ckpt;
}

SptStressModel model_from_checkpoint(const Checkpoint& ckpt) {
  Rng scratch(0);
  SptStressModel model(model_config(ckpt.config, ckpt.grid), scratch);
  ParamList live = model.params();
  if (live.size() != ckpt.params.size()) {
    fail("model_from_checkpoint: checkpoint has " + std::to_string(ckpt.params.size()) +
         " parameters, model expects " + std::to_string(live.size()));
  }
  for (std::size_t i = 0; i < live.size(); ++i) {
    const NamedParam& stored = ckpt.params[i];
    NamedParam& target = live[i];
    if (stored.name != target.name) {
      fail("model_from_checkpoint: parameter '" + stored.name + "' does not match expected '" +
           target.name + "'");
    }
    if (!same_shape(stored.tensor.shape(), target.tensor.shape())) {
      fail("model_from_checkpoint: parameter '" + stored.name + "' has shape " +
           shape_str(stored.tensor.shape()) + ", model expects " +
           shape_str(target.tensor.shape()));
    }
    target.tensor.data() = stored.tensor.data();
  }
  return model;
}

void write_loss_history(const std::vector<double>& history, const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) fail("write_loss_history: cannot open " + path);
  file << "epoch,mean_loss\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    file << (i + 1) << ',' << fmt_double(history[i]) << '\n';
  }
  if (!file.flush()) fail("write_loss_history: write failed for " + path);
}

}  // namespace spt2ss
