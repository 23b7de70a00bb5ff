#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "spt2ss/gaf.hpp"
#include "spt2ss/material.hpp"
#include "spt2ss/metrics.hpp"
#include "spt2ss/model.hpp"
#include "spt2ss/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spt2ss;

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("SPT2SS_LOG");
    if (!env) return LogLevel::info;
    const std::string v = env;
    if (v == "quiet") return LogLevel::quiet;
    if (v == "debug") return LogLevel::debug;
    return LogLevel::info;
  }();
  return level;
}

template <class... Args>
void log_info(const char* fmt, Args... args) {
  if (log_level() >= LogLevel::info) {
    std::fprintf(stderr, fmt, args...);
    std::fputc('\n', stderr);
  }
}

template <class... Args>
void log_debug(const char* fmt, Args... args) {
  if (log_level() >= LogLevel::debug) {
    std::fprintf(stderr, fmt, args...);
    std::fputc('\n', stderr);
  }
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open " + path);
  file << j.dump(2) << '\n';
  if (!file.flush()) throw std::runtime_error("write failed for " + path);
}

json read_json_file(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open " + path);
  json j;
  file >> j;
  return j;
}

struct GenerateOpts {
  int n_train = 4500;
  int n_test = 500;
  std::uint64_t seed = 0;
  GridConfig grid;
  std::string out_dir;
};

int run_generate(const GenerateOpts& opts) {
  fs::create_directories(opts.out_dir);
  log_info("generating %d train + %d test samples (seed %llu)", opts.n_train, opts.n_test,
           static_cast<unsigned long long>(opts.seed));
  auto [train_ds, test_ds] = generate_dataset(opts.n_train, opts.n_test, opts.seed, opts.grid);
  const std::string train_path = (fs::path(opts.out_dir) / "train.csv").string();
  const std::string test_path = (fs::path(opts.out_dir) / "test.csv").string();
  write_csv(train_ds, train_path);
  write_csv(test_ds, test_path);

  const json manifest{
      {"command", "generate"},
      {"seed", opts.seed},
      {"n_train", opts.n_train},
      {"n_test", opts.n_test},
      {"grid", json(opts.grid)},
      {"sampling_ranges",
       {{"sigma_y_train", {ranges::kSigmaYTrainLo, ranges::kSigmaYTrainHi}},
        {"sigma_y_test", {ranges::kSigmaYTestLo, ranges::kSigmaYTestHi}},
        {"n", {ranges::kNLo, ranges::kNHi}},
        {"t", {ranges::kTLo, ranges::kTHi}}}},
      {"norm_stats", json(train_ds.norm_stats)},
      {"files", {{"train", "train.csv"}, {"test", "test.csv"}}}};
  write_json_file(manifest, (fs::path(opts.out_dir) / "manifest.json").string());
  log_info("wrote %s, %s and manifest.json", train_path.c_str(), test_path.c_str());
  return 0;
}

/// Reads the grid the dataset was generated with; falls back to defaults
/// when no manifest sits next to the CSV.
GridConfig grid_near(const std::string& csv_path) {
  const fs::path manifest = fs::path(csv_path).parent_path() / "manifest.json";
  GridConfig grid;
  if (fs::exists(manifest)) {
    grid = read_json_file(manifest.string()).at("grid").get<GridConfig>();
  }
  return grid;
}

struct TrainOpts {
  std::string data;  // train.csv (or a directory containing it)
  std::string out_dir = ".";
  std::string config_file;
  bool baseline_1d = false;
  bool full_arch = false;
};

/// Command-line defaults are sized for quick desk runs; --full-arch restores
/// the library defaults (hidden 128, 5 layers, 4 heads).
TrainConfig cli_defaults() {
  TrainConfig cfg;
  cfg.hidden_size = 64;
  cfg.num_layers = 2;
  return cfg;
}

const std::set<std::string>& config_keys() {
  static const std::set<std::string> keys = [] {
    json j = TrainConfig{};
    std::set<std::string> k;
    for (const auto& item : j.items()) k.insert(item.key());
    return k;
  }();
  return keys;
}

int run_train(const TrainOpts& opts, const TrainConfig& flag_cfg, const CLI::App* cmd) {
  TrainConfig cfg = cli_defaults();
  if (!opts.config_file.empty()) {
    const json file_json = read_json_file(opts.config_file);
    for (const auto& item : file_json.items()) {
      if (!config_keys().count(item.key())) {
        std::fprintf(stderr, "error: unknown config key '%s' in %s\n", item.key().c_str(),
                     opts.config_file.c_str());
        return 2;
      }
    }
    json merged = json(cfg);
    merged.update(file_json);
    cfg = merged.get<TrainConfig>();
  }
  if (opts.full_arch) {
    cfg.hidden_size = 128;
    cfg.num_layers = 5;
    cfg.num_heads = 4;
  }
  const auto take = [&](const char* flag, auto member) {
    if (cmd->count(flag)) cfg.*member = flag_cfg.*member;
  };
  take("--epochs", &TrainConfig::epochs);
  take("--batch-size", &TrainConfig::batch_size);
  take("--lr", &TrainConfig::lr);
  take("--beta1", &TrainConfig::beta1);
  take("--beta2", &TrainConfig::beta2);
  take("--eps", &TrainConfig::eps);
  take("--teacher-forcing", &TrainConfig::teacher_forcing_ratio);
  take("--seed", &TrainConfig::seed);
  take("--hidden-size", &TrainConfig::hidden_size);
  take("--num-layers", &TrainConfig::num_layers);
  take("--num-heads", &TrainConfig::num_heads);
  take("--dropout", &TrainConfig::dropout);
  take("--clip-norm", &TrainConfig::clip_norm);
  if (cmd->count("--attn-exact")) cfg.attn_exact = flag_cfg.attn_exact;
  if (cmd->count("--loss")) cfg.loss_kind = flag_cfg.loss_kind;
  if (opts.baseline_1d) cfg.gaf_enabled = false;

  std::string train_csv = opts.data;
  if (fs::is_directory(train_csv)) train_csv = (fs::path(train_csv) / "train.csv").string();
  const Dataset ds = read_csv(train_csv, grid_near(train_csv), Split::train);
  log_info("training on %zu samples (%s, hidden %d, layers %d, %d epochs, seed %llu)",
           ds.samples.size(), cfg.gaf_enabled ? "proposed" : "1d-baseline", cfg.hidden_size,
           cfg.num_layers, cfg.epochs, static_cast<unsigned long long>(cfg.seed));

  fs::create_directories(opts.out_dir);
  TrainResult result = train(ds, cfg, [](int epoch, double loss) {
    log_debug("epoch %d mean loss %.6g", epoch, loss);
  });
  const std::string ckpt_path = (fs::path(opts.out_dir) / "model.ckpt").string();
  const std::string history_path = (fs::path(opts.out_dir) / "loss_history.csv").string();
  save_checkpoint(result.checkpoint, ckpt_path);
  write_loss_history(result.loss_history, history_path);
  const json run_meta{{"command", "train"},
                      {"data", train_csv},
                      {"config", json(cfg)},
                      {"grid", json(result.checkpoint.grid)},
                      {"final_loss", result.checkpoint.final_loss},
                      {"files", {{"checkpoint", "model.ckpt"}, {"loss_history", "loss_history.csv"}}}};
  write_json_file(run_meta, (fs::path(opts.out_dir) / "run.json").string());
  log_info("final mean loss %.6g; wrote %s", result.checkpoint.final_loss, ckpt_path.c_str());
  return 0;
}

struct EvaluateOpts {
  std::string checkpoint;
  std::string data;
  std::string out = "report.json";
};

int run_evaluate(const EvaluateOpts& opts) {
  const Checkpoint ckpt = load_checkpoint(opts.checkpoint);
  const Dataset ds = read_csv(opts.data, ckpt.grid, Split::test);
  const EvalReport report = evaluate(ckpt, ds);
  json j = report_to_json(report);
  j["config"] = json(ckpt.config);
  j["checkpoint"] = opts.checkpoint;
  j["data"] = opts.data;
  write_json_file(j, opts.out);
  std::printf("model:   %s\n", report.model_tag.c_str());
  std::printf("samples: %zu\n", report.per_sample_mae.size());
  std::printf("max MAE: %.4f MPa\n", report.max_mae);
  std::printf("min MAE: %.4f MPa\n", report.min_mae);
  std::printf("max R2:  %.4f\n", report.max_r2);
  std::printf("min R2:  %.4f\n", report.min_r2);
  log_info("wrote %s", opts.out.c_str());
  return 0;
}

struct SampleOpts {
  std::string checkpoint;
  std::string data;
  int index = 0;
  std::string out;
};

const CurvePair& sample_at(const Dataset& ds, int index) {
  if (index < 0 || index >= static_cast<int>(ds.samples.size())) {
    throw std::runtime_error("sample index " + std::to_string(index) +
                             " out of range for dataset of " +
                             std::to_string(ds.samples.size()));
  }
  return ds.samples[static_cast<std::size_t>(index)];
}

int run_predict(const SampleOpts& opts) {
  const Checkpoint ckpt = load_checkpoint(opts.checkpoint);
  const Dataset ds = read_csv(opts.data, ckpt.grid, Split::test);
  const CurvePair& pair = sample_at(ds, opts.index);
  const SptStressModel model = model_from_checkpoint(ckpt);
  const auto curves = predict_curves(model, ckpt.norm_stats, {&pair});

  std::ofstream file(opts.out, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open " + opts.out);
  file << "strain,pred_stress\n";
  char buf[32];
  for (std::size_t i = 0; i < curves[0].size(); ++i) {
    auto r1 = std::to_chars(buf, buf + sizeof(buf), pair.strain_grid[i]);
    file.write(buf, r1.ptr - buf);
    file << ',';
    auto r2 = std::to_chars(buf, buf + sizeof(buf), curves[0][i]);
    file.write(buf, r2.ptr - buf);
    file << '\n';
  }
  if (!file.flush()) throw std::runtime_error("write failed for " + opts.out);
  const json meta{{"command", "predict"},
                  {"checkpoint", opts.checkpoint},
                  {"data", opts.data},
                  {"index", opts.index},
                  {"config", json(ckpt.config)}};
  write_json_file(meta, opts.out + ".meta.json");
  log_info("wrote %s (%zu rows)", opts.out.c_str(), curves[0].size());
  return 0;
}

struct ExportGafOpts {
  std::string data;
  int index = 0;
  std::string out;
  std::string csv;
};

int run_export_gaf(const ExportGafOpts& opts) {
  const Dataset ds = read_csv(opts.data, grid_near(opts.data), Split::test);
  const CurvePair& pair = sample_at(ds, opts.index);
  const GafImage img = gaf_transform(pair.load, GafMode::lenient);
  export_pgm(img, opts.out);
  if (!opts.csv.empty()) export_gaf_csv(img, opts.csv);
  const json meta{{"command", "export-gaf"},
                  {"data", opts.data},
                  {"index", opts.index},
                  {"size", img.size},
                  {"data_min", img.data_min},
                  {"data_max", img.data_max}};
  write_json_file(meta, opts.out + ".meta.json");
  log_info("wrote %dx%d image to %s", img.size, img.size, opts.out.c_str());
  return 0;
}

int run_plot(const SampleOpts& opts) {
  const Checkpoint ckpt = load_checkpoint(opts.checkpoint);
  const Dataset ds = read_csv(opts.data, ckpt.grid, Split::test);
  const CurvePair& pair = sample_at(ds, opts.index);
  const SptStressModel model = model_from_checkpoint(ckpt);
  const auto curves = predict_curves(model, ckpt.norm_stats, {&pair});
  const std::string csv_path = opts.out + ".csv";
  const std::string svg_path = opts.out + ".svg";
  emit_plot(pair, curves[0], csv_path, svg_path);
  const json meta{{"command", "plot"},
                  {"checkpoint", opts.checkpoint},
                  {"data", opts.data},
                  {"index", opts.index},
                  {"config", json(ckpt.config)}};
  write_json_file(meta, opts.out + ".meta.json");
  log_info("wrote %s and %s", csv_path.c_str(), svg_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Load-displacement to stress-strain sequence model for small punch tests"};
  app.require_subcommand(1);

  GenerateOpts gen;
  CLI::App* cmd_gen = app.add_subcommand("generate", "Generate synthetic train/test datasets");
  cmd_gen->add_option("--n-train", gen.n_train, "Training samples")->capture_default_str();
  cmd_gen->add_option("--n-test", gen.n_test, "Test samples")->capture_default_str();
  cmd_gen->add_option("--seed", gen.seed, "Generation seed")->capture_default_str();
  cmd_gen->add_option("--l-in", gen.grid.l_in, "Input sequence length")->capture_default_str();
  cmd_gen->add_option("--l-out", gen.grid.l_out, "Output sequence length")->capture_default_str();
  cmd_gen->add_option("--delta-max", gen.grid.delta_max, "Displacement grid extent, mm")
      ->capture_default_str();
  cmd_gen->add_option("--eps-max", gen.grid.eps_max, "Strain grid extent")->capture_default_str();
  cmd_gen->add_option("--out", gen.out_dir, "Output directory")->required();

  TrainOpts tr;
  TrainConfig flag_cfg = cli_defaults();
  std::string loss_name = "mse";
  CLI::App* cmd_train = app.add_subcommand("train", "Train a model on a generated dataset");
  cmd_train->add_option("--data", tr.data, "train.csv path or its directory")->required();
  cmd_train->add_option("--out", tr.out_dir, "Output directory")->capture_default_str();
  cmd_train->add_option("--config", tr.config_file,
                        "JSON config file (precedence: flags > file > defaults)");
  cmd_train->add_option("--epochs", flag_cfg.epochs)->capture_default_str();
  cmd_train->add_option("--batch-size", flag_cfg.batch_size)->capture_default_str();
  cmd_train->add_option("--lr", flag_cfg.lr)->capture_default_str();
  cmd_train->add_option("--beta1", flag_cfg.beta1)->capture_default_str();
  cmd_train->add_option("--beta2", flag_cfg.beta2)->capture_default_str();
  cmd_train->add_option("--eps", flag_cfg.eps)->capture_default_str();
  cmd_train->add_option("--teacher-forcing", flag_cfg.teacher_forcing_ratio)
      ->capture_default_str();
  cmd_train->add_option("--seed", flag_cfg.seed)->capture_default_str();
  cmd_train->add_option("--hidden-size", flag_cfg.hidden_size)->capture_default_str();
  cmd_train->add_option("--num-layers", flag_cfg.num_layers)->capture_default_str();
  cmd_train->add_option("--num-heads", flag_cfg.num_heads)->capture_default_str();
  cmd_train->add_option("--dropout", flag_cfg.dropout)->capture_default_str();
  cmd_train->add_option("--clip-norm", flag_cfg.clip_norm)->capture_default_str();
  cmd_train->add_flag("--attn-exact", flag_cfg.attn_exact,
                      "Literal single-head attention without projections");
  cmd_train->add_option("--loss", loss_name, "mse or mae")->capture_default_str();
  cmd_train->add_flag("--baseline-1d", tr.baseline_1d, "Disable the image branch (1-D baseline)");
  cmd_train->add_flag("--full-arch", tr.full_arch, "Hidden size 128, 5 layers, 4 heads");

  EvaluateOpts ev;
  CLI::App* cmd_eval = app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset CSV");
  cmd_eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint path")->required();
  cmd_eval->add_option("--data", ev.data, "Dataset CSV")->required();
  cmd_eval->add_option("--out", ev.out, "Report JSON path")->capture_default_str();

  SampleOpts pr;
  CLI::App* cmd_pred = app.add_subcommand("predict", "Predict one sample's stress curve");
  cmd_pred->add_option("--checkpoint", pr.checkpoint, "Checkpoint path")->required();
  cmd_pred->add_option("--data", pr.data, "Dataset CSV")->required();
  cmd_pred->add_option("--index", pr.index, "Sample index")->capture_default_str();
  cmd_pred->add_option("--out", pr.out, "Output CSV path")->required();

  ExportGafOpts eg;
  CLI::App* cmd_gaf = app.add_subcommand("export-gaf", "Export one sample's angular-field image");
  cmd_gaf->add_option("--data", eg.data, "Dataset CSV")->required();
  cmd_gaf->add_option("--index", eg.index, "Sample index")->capture_default_str();
  cmd_gaf->add_option("--out", eg.out, "Output PGM path")->required();
  cmd_gaf->add_option("--csv", eg.csv, "Optional matrix CSV path");

  SampleOpts pl;
  CLI::App* cmd_plot = app.add_subcommand("plot", "Emit overlay CSV + SVG for one sample");
  cmd_plot->add_option("--checkpoint", pl.checkpoint, "Checkpoint path")->required();
  cmd_plot->add_option("--data", pl.data, "Dataset CSV")->required();
  cmd_plot->add_option("--index", pl.index, "Sample index")->capture_default_str();
  cmd_plot->add_option("--out", pl.out, "Output base path (.csv/.svg appended)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(cmd_gen)) return run_generate(gen);
    if (app.got_subcommand(cmd_train)) {
      try {
        flag_cfg.loss_kind = loss_kind_from_name(loss_name);
      } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
      }
      return run_train(tr, flag_cfg, cmd_train);
    }
    if (app.got_subcommand(cmd_eval)) return run_evaluate(ev);
    if (app.got_subcommand(cmd_pred)) return run_predict(pr);
    if (app.got_subcommand(cmd_gaf)) return run_export_gaf(eg);
    if (app.got_subcommand(cmd_plot)) return run_plot(pl);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
