// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: dataset generation, two-stage training,
// evaluation sweeps, and SVG plots.
//
// Exit codes: 0 success, 2 usage/config error, 3 I/O error, 4 numerical
// failure (diverged training).  The XLMIMO_DATA_DIR environment variable
// sets the default directory for output artifacts.

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "xlmimo/checkpoint.hpp"
#include "xlmimo/dataset.hpp"
#include "xlmimo/eval.hpp"
#include "xlmimo/pipeline.hpp"
#include "xlmimo/plot.hpp"
#include "xlmimo/run_config.hpp"

namespace {

using namespace xlm;

constexpr int kOk = 0, kUsage = 2, kIo = 3, kNumerical = 4;

std::string data_dir() {
  const char* env = std::getenv("XLMIMO_DATA_DIR");
  return env && *env ? env : ".";
}

// Re-throw file-writing failures under a type the top-level handler maps
// to the I/O exit code rather than the usage one.
template <class Fn>
void io_phase(Fn&& fn) {
  try {
    fn();
  } catch (const EvalError& e) {
    throw std::runtime_error(e.what());
  }
}

struct ConfigArgs {
  std::string config_path;
  std::string preset;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.config_path,
                  "Run-config JSON file (see README for the key set)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--preset", args.preset,
                  "Built-in config: ca-desk, usa-desk, moa-desk, na-desk, "
                  "na-overfit, trend-na, trend-ca");
  cmd->add_option_function<std::uint64_t>(
         "--seed",
         [&args](const std::uint64_t& v) {
           args.seed = v;
           args.seed_set = true;
         },
         "Override the config seed (generation: master seed; training: "
         "optimizer seed)");
}

RunConfig resolve_config(const ConfigArgs& args) {
  if (!args.config_path.empty() && !args.preset.empty())
    throw ConfigError("--config and --preset are mutually exclusive");
  if (!args.config_path.empty()) {
    std::vector<std::string> notices;
    RunConfig rc = load_run_config(args.config_path, &notices);
    // Notices go to stderr so stdout stays clean machine-readable output.
    for (const auto& n : notices) std::fprintf(stderr, "%s\n", n.c_str());
    return rc;
  }
  if (!args.preset.empty()) return preset_config(args.preset);
  return RunConfig{};
}

std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

// Single-line config dump for manifests: together with the command line
// it suffices to re-execute the run.
std::vector<std::pair<std::string, std::string>> manifest_base(
    const std::string& command, const RunConfig& rc) {
  std::string compact = run_config_json(rc);
  for (auto& c : compact)
    if (c == '\n') c = ' ';
  return {{"command", command},
          {"preset", rc.preset.empty() ? "(none)" : rc.preset},
          {"config_json", compact}};
}

Split make_split(const Dataset& ds, const SplitSpec& sp) {
  return split_indices(ds.cfg.count, sp.f_train, sp.f_val, sp.f_test, sp.seed);
}

void write_loss_csv(const std::string& path, const TrainResult& res) {
  std::string body = "step,loss\n";
  for (const auto& row : res.trace) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%d,%.17g\n", row.step, row.loss);
    body += buf;
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open loss CSV: " + path);
  f << body;
  f.flush();
  if (!f) throw std::runtime_error("failed writing loss CSV: " + path);
}

int cmd_gen(const ConfigArgs& cargs, const std::string& out) {
  RunConfig rc = resolve_config(cargs);
  if (cargs.seed_set) rc.gen.master_seed = cargs.seed;

  const Dataset ds = generate_dataset(rc.gen);
  io_phase([&] { write_dataset(out, ds); });

  const std::uint64_t hash = config_hash(ds.cfg);
  std::printf("config hash   : %s\n", hash_hex(hash).c_str());
  std::printf("samples       : %llu\n",
              static_cast<unsigned long long>(ds.cfg.count));
  std::printf("array         : %s, %d elements, aperture %.6g m (%.6g d)\n",
              ds.layout.kind.describe().c_str(), ds.layout.n(),
              ds.layout.aperture(), ds.layout.aperture() / ds.layout.d);
  std::printf("observation   : K=%d subcarriers x %d measurements\n",
              ds.n_sc(), ds.n_meas());
  if (rc.gen.scene.l_max == 0)
    std::printf("scene         : pure LoS (no scatter clusters)\n");
  std::printf("wrote %s\n", out.c_str());

  auto kv = manifest_base("gen", rc);
  kv.emplace_back("config_hash", hash_hex(hash));
  kv.emplace_back("out", out);
  write_manifest(out + ".manifest.txt", kv);
  return kOk;
}

int cmd_train(const ConfigArgs& cargs, const std::string& dataset_path,
              const std::string& stage, const std::string& pos_ckpt,
              std::string out) {
  RunConfig rc = resolve_config(cargs);
  if (cargs.seed_set) {
    rc.train1.seed = cargs.seed;
    rc.train2.seed = cargs.seed;
  }
  if (out.empty()) out = data_dir() + "/stage_" + stage + ".ckpt";

  const Dataset ds = read_dataset(dataset_path);
  const std::uint64_t ds_hash = config_hash(ds.cfg);
  const Split split = make_split(ds, rc.split);
  if (split.train.empty())
    throw ConfigError("training split is empty; adjust dataset.split");

  StageArtifacts art;
  if (stage == "pos") {
    art = train_stage1(ds, split.train, rc.net, rc.train1);
  } else {
    if (pos_ckpt.empty())
      throw ConfigError(
          "stage ch needs the stage-pos checkpoint: pass --pos-ckpt");
    CheckpointMeta meta;
    const auto s1 = load_checkpoint(pos_ckpt, &meta);
    if (meta.cfg.head != ad::HeadKind::position)
      throw ConfigError("--pos-ckpt does not hold a position-stage model");
    if (meta.dataset_hash != ds_hash)
      throw ConfigError(
          "--pos-ckpt was trained on a different dataset (config hash "
          "mismatch)");
    art = train_stage2(ds, split.train, s1, meta.scales, rc.net, rc.train2);
  }
  io_phase([&] {
    save_checkpoint(out, art.model, art.scales, ds_hash);
  });
  write_loss_csv(out + ".loss.csv", art.result);

  std::printf("stage         : %s\n", stage.c_str());
  std::printf("train samples : %zu\n", split.train.size());
  std::printf("parameters    : %zu\n", ad::param_count(art.model));
  std::printf("steps run     : %d\n", art.result.steps_run);
  std::printf("final loss    : %.17g\n", art.result.final_loss);
  std::printf("wrote %s and %s.loss.csv\n", out.c_str(), out.c_str());

  auto kv = manifest_base("train", rc);
  kv.emplace_back("dataset", dataset_path);
  kv.emplace_back("dataset_config_hash", hash_hex(ds_hash));
  kv.emplace_back("stage", stage);
  if (!pos_ckpt.empty()) kv.emplace_back("pos_ckpt", pos_ckpt);
  kv.emplace_back("out", out);
  write_manifest(out + ".manifest.txt", kv);
  return kOk;
}

int cmd_eval(const ConfigArgs& cargs, const std::string& dataset_path,
             const std::string& pos_ckpt, const std::string& ch_ckpt,
             const std::vector<std::string>& methods_flag,
             const std::vector<double>& snr_flag, const std::string& out) {
  RunConfig rc = resolve_config(cargs);
  if (!methods_flag.empty()) rc.sweep.methods = methods_flag;
  if (!snr_flag.empty()) rc.sweep.snr_db = snr_flag;

  const Dataset ds = read_dataset(dataset_path);
  const std::uint64_t ds_hash = config_hash(ds.cfg);
  const Split split = make_split(ds, rc.split);
  if (split.test.empty())
    throw ConfigError("test split is empty; adjust dataset.split");

  bool needs_s1 = false, needs_s2 = false;
  for (const auto& m : rc.sweep.methods) {
    if (m == "cpmamba") needs_s1 = needs_s2 = true;
    if (m == "cpmamba-oracle") needs_s2 = true;
  }
  ad::CpMambaModel<float> s1, s2;
  SweepModels models;
  CheckpointMeta meta1, meta2;
  if (needs_s1) {
    if (pos_ckpt.empty())
      throw ConfigError("method cpmamba needs --pos-ckpt");
    s1 = load_checkpoint(pos_ckpt, &meta1);
    if (meta1.cfg.head != ad::HeadKind::position)
      throw ConfigError("--pos-ckpt does not hold a position-stage model");
    if (meta1.dataset_hash != ds_hash)
      throw ConfigError("--pos-ckpt dataset hash mismatch");
    models.stage1 = &s1;
    models.scales = meta1.scales;
  }
  if (needs_s2) {
    if (ch_ckpt.empty())
      throw ConfigError(
          "methods cpmamba/cpmamba-oracle need --ch-ckpt");
    s2 = load_checkpoint(ch_ckpt, &meta2);
    if (meta2.cfg.head != ad::HeadKind::channel)
      throw ConfigError("--ch-ckpt does not hold a channel-stage model");
    if (meta2.dataset_hash != ds_hash)
      throw ConfigError("--ch-ckpt dataset hash mismatch");
    models.stage2 = &s2;
    models.scales = meta2.scales;
  }

  const auto rows = run_sweep(ds, split.test, models, rc.sweep);
  io_phase([&] { write_sweep_csv(out, rows); });

  std::printf("%s", sweep_csv(rows).c_str());
  std::printf("wrote %s\n", out.c_str());

  auto kv = manifest_base("eval", rc);
  kv.emplace_back("dataset", dataset_path);
  kv.emplace_back("dataset_config_hash", hash_hex(ds_hash));
  if (!pos_ckpt.empty()) kv.emplace_back("pos_ckpt", pos_ckpt);
  if (!ch_ckpt.empty()) kv.emplace_back("ch_ckpt", ch_ckpt);
  kv.emplace_back("out", out);
  write_manifest(out + ".manifest.txt", kv);
  return kOk;
}

int cmd_plot(const std::string& csv_path, const std::string& metric,
             std::string out) {
  if (out.empty()) out = data_dir() + "/plot_" + metric + ".svg";
  const auto rows = read_sweep_csv(csv_path);  // EvalError -> usage exit
  const PlotMetric m =
      metric == "mpe" ? PlotMetric::mpe : PlotMetric::nmse;
  const std::string body = plot_svg(rows, m);  // validates data presence
  io_phase([&] { write_plot_svg(out, rows, m); });
  std::printf("wrote %s (%zu bytes)\n", out.c_str(), body.size());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "xlmimo: near-field sparse-array channel estimation and positioning "
      "lab.\nExit codes: 0 ok, 2 usage/config, 3 I/O, 4 numerical failure.\n"
      "XLMIMO_DATA_DIR sets the default output directory."};
  app.require_subcommand(1);
  const std::string dir = data_dir();

  ConfigArgs gen_cfg;
  std::string gen_out = dir + "/dataset.xlmd";
  auto* gen = app.add_subcommand("gen", "Generate a dataset file");
  add_config_options(gen, gen_cfg);
  gen->add_option("--out", gen_out, "Output dataset path")
      ->capture_default_str();

  ConfigArgs train_cfg;
  std::string train_data, train_stage, train_pos_ckpt, train_out;
  auto* train = app.add_subcommand("train", "Train one stage");
  train->add_option("dataset", train_data, "Dataset file from `gen`")
      ->required();
  train->add_option("--stage", train_stage,
                    "pos: pilot -> position; ch: prior -> channel")
      ->required()
      ->check(CLI::IsMember({"pos", "ch"}));
  add_config_options(train, train_cfg);
  train->add_option("--pos-ckpt", train_pos_ckpt,
                    "Trained stage-pos checkpoint (required for --stage ch)");
  train->add_option("--out", train_out,
                    "Checkpoint path (default <data dir>/stage_<stage>.ckpt; "
                    "loss CSV and manifest are written next to it)");

  ConfigArgs eval_cfg;
  std::string eval_data, eval_pos, eval_ch;
  std::string eval_out = dir + "/metrics.csv";
  std::vector<std::string> eval_methods;
  std::vector<double> eval_snr;
  auto* eval = app.add_subcommand("eval", "Run the SNR sweep on the test split");
  eval->add_option("dataset", eval_data, "Dataset file from `gen`")
      ->required();
  add_config_options(eval, eval_cfg);
  eval->add_option("--pos-ckpt", eval_pos, "Stage-pos checkpoint");
  eval->add_option("--ch-ckpt", eval_ch, "Stage-ch checkpoint");
  eval->add_option("--methods", eval_methods,
                   "Override methods (cpmamba, cpmamba-oracle, ls, grid, "
                   "oracle)")
      ->delimiter(',');
  eval->add_option("--snr", eval_snr, "Override SNR points in dB")
      ->delimiter(',');
  eval->add_option("--out", eval_out, "Metrics CSV path")
      ->capture_default_str();

  std::string plot_in, plot_metric = "nmse", plot_out;
  auto* plot = app.add_subcommand("plot", "Render an SVG from a metrics CSV");
  plot->add_option("csv", plot_in, "Metrics CSV from `eval`")->required();
  plot->add_option("--metric", plot_metric, "Curve to draw")
      ->check(CLI::IsMember({"mpe", "nmse"}))
      ->capture_default_str();
  plot->add_option("--out", plot_out,
                   "SVG path (default <data dir>/plot_<metric>.svg)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_cfg, gen_out);
    if (train->parsed())
      return cmd_train(train_cfg, train_data, train_stage, train_pos_ckpt,
                       train_out);
    if (eval->parsed())
      return cmd_eval(eval_cfg, eval_data, eval_pos, eval_ch, eval_methods,
                      eval_snr, eval_out);
    return cmd_plot(plot_in, plot_metric, plot_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const InvalidParameter& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const EvalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const TrainingError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumerical;
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  } catch (const DatasetError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  }
}
