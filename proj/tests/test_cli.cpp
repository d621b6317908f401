// SPDX-License-Identifier: Apache-2.0
//
// End-to-end checks of the command-line tool: every subcommand, the
// documented exit codes (0 ok, 2 usage/config, 3 I/O, 4 numerical), and
// artifact reproducibility.  Spawns the real binary.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "xlmimo/eval.hpp"
#include "xlmimo/io.hpp"

#ifndef XLMIMO_CLI_PATH
#error "XLMIMO_CLI_PATH must point at the CLI binary"
#endif

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "xlmimo_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

RunResult run(const std::string& args) {
  const fs::path out = work_dir() / "stdout.txt";
  const fs::path err = work_dir() / "stderr.txt";
  const std::string cmd = std::string(XLMIMO_CLI_PATH) + " " + args + " > " +
                          out.string() + " 2> " + err.string();
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string path_of(const char* name) { return (work_dir() / name).string(); }

// Small enough to train in seconds, big enough to exercise every path.
const char* kConfig = R"({
  "dataset": {
    "count": 16, "master_seed": 7,
    "array": "ca", "array_params": [8],
    "fc_hz": 28e9, "bw_hz": 100e6, "n_subcarriers": 8,
    "n_slots": 2, "n_rf": 4,
    "snr_min_db": 5.0, "snr_max_db": 15.0,
    "scene": {"l_min": 1, "l_max": 2, "rays_per_cluster": 2,
              "nlos_scale": 0.01},
    "split": {"train": 0.75, "val": 0.0, "test": 0.25, "seed": 1234}
  },
  "network": {"stages": 2, "base_channels": 2, "d_state": 2, "dt_rank": 1,
              "k_conv": 2},
  "train_stage1": {"batch": 4, "steps": 10, "lr": 1e-3, "seed": 1,
                   "report_every": 5},
  "train_stage2": {"batch": 4, "steps": 10, "lr": 1e-3, "seed": 2,
                   "report_every": 5},
  "eval": {"snr_db": [5, 15], "methods": ["ls"],
           "grid": {"n_r": 8, "n_theta": 8}}
})";

std::string config_path() {
  static const std::string p = [] {
    const std::string path = path_of("cfg.json");
    std::ofstream f(path);
    f << kConfig;
    return path;
  }();
  return p;
}

int line_count(const std::string& s) {
  int n = 0;
  for (char c : s)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("help succeeds and usage errors exit 2") {
  CHECK(run("--help").code == 0);
  CHECK(run("gen --help").code == 0);
  CHECK(run("").code == 2);            // a subcommand is required
  CHECK(run("frobnicate").code == 2);  // unknown subcommand
  CHECK(run("plot").code == 2);        // missing required positional
  CHECK(run("train x.xlmd --stage nowhere").code == 2);  // bad choice
  const RunResult both =
      run("gen --config " + config_path() + " --preset ca-desk");
  CHECK(both.code == 2);
  CHECK(both.err.find("mutually exclusive") != std::string::npos);
}

TEST_CASE("gen writes a reproducible dataset and a manifest") {
  const RunResult a =
      run("gen --config " + config_path() + " --out " + path_of("a.xlmd"));
  REQUIRE(a.code == 0);
  CHECK(a.out.find("config hash") != std::string::npos);
  CHECK(a.out.find("8 elements") != std::string::npos);
  // Defaulted-key notices go to stderr, data to stdout.
  CHECK(a.err.find("note: dataset.ue.r_max_m defaulted") !=
        std::string::npos);
  CHECK(a.out.find("note:") == std::string::npos);
  CHECK(fs::exists(path_of("a.xlmd") + ".manifest.txt"));

  REQUIRE(run("gen --config " + config_path() + " --out " +
              path_of("b.xlmd"))
              .code == 0);
  CHECK(xlm::io::fnv1a_file(path_of("a.xlmd")) ==
        xlm::io::fnv1a_file(path_of("b.xlmd")));

  REQUIRE(run("gen --config " + config_path() + " --seed 99 --out " +
              path_of("c.xlmd"))
              .code == 0);
  CHECK(xlm::io::fnv1a_file(path_of("a.xlmd")) !=
        xlm::io::fnv1a_file(path_of("c.xlmd")));
}

TEST_CASE("gen reports a scatter-free scene") {
  std::ofstream f(path_of("pure_los.json"));
  f << R"({"dataset": {"count": 2, "array_params": [8], "n_subcarriers": 4,
           "n_slots": 2, "scene": {"l_min": 0, "l_max": 0}}})";
  f.close();
  const RunResult r = run("gen --config " + path_of("pure_los.json") +
                          " --out " + path_of("pure.xlmd"));
  REQUIRE(r.code == 0);
  CHECK(r.out.find("pure LoS") != std::string::npos);
}

TEST_CASE("train writes checkpoints and a loss trace at report cadence") {
  const RunResult pos =
      run("train " + path_of("a.xlmd") + " --config " + config_path() +
          " --stage pos --out " + path_of("pos.ckpt"));
  REQUIRE(pos.code == 0);
  CHECK(pos.out.find("final loss") != std::string::npos);
  CHECK(fs::exists(path_of("pos.ckpt")));
  // 10 steps reported every 5: steps 0, 5, and the final step, + header.
  const std::string trace = slurp(path_of("pos.ckpt.loss.csv"));
  CHECK(line_count(trace) == 4);
  CHECK(trace.rfind("step,loss\n0,", 0) == 0);

  const RunResult noflag = run("train " + path_of("a.xlmd") + " --config " +
                               config_path() + " --stage ch");
  CHECK(noflag.code == 2);
  CHECK(noflag.err.find("--pos-ckpt") != std::string::npos);

  const RunResult ch =
      run("train " + path_of("a.xlmd") + " --config " + config_path() +
          " --stage ch --pos-ckpt " + path_of("pos.ckpt") + " --out " +
          path_of("ch.ckpt"));
  REQUIRE(ch.code == 0);
  CHECK(fs::exists(path_of("ch.ckpt.loss.csv")));

  // A stage-ch checkpoint is rejected where a stage-pos one is expected.
  const RunResult wrong =
      run("train " + path_of("a.xlmd") + " --config " + config_path() +
          " --stage ch --pos-ckpt " + path_of("ch.ckpt"));
  CHECK(wrong.code == 2);
}

TEST_CASE("eval emits one row per method and snr point") {
  const RunResult r =
      run("eval " + path_of("a.xlmd") + " --config " + config_path() +
          " --methods cpmamba,ls,grid --snr 0,5,10,15,20" +
          " --pos-ckpt " + path_of("pos.ckpt") + " --ch-ckpt " +
          path_of("ch.ckpt") + " --out " + path_of("metrics.csv"));
  REQUIRE(r.code == 0);
  const auto rows = xlm::read_sweep_csv(path_of("metrics.csv"));
  CHECK(rows.size() == 15);  // 3 methods x 5 SNR points
  for (const auto& row : rows) CHECK(row.n == 4);  // 0.25 * 16 held out

  // Learned methods demand their checkpoints.
  CHECK(run("eval " + path_of("a.xlmd") + " --config " + config_path() +
            " --methods cpmamba")
            .code == 2);
  // Missing dataset is an I/O failure.
  CHECK(run("eval " + path_of("nope.xlmd") + " --config " + config_path() +
            " --methods ls")
            .code == 3);
  // A corrupt checkpoint is an I/O failure.
  CHECK(run("eval " + path_of("a.xlmd") + " --config " + config_path() +
            " --methods cpmamba --pos-ckpt " + path_of("a.xlmd") +
            " --ch-ckpt " + path_of("a.xlmd"))
            .code == 3);
}

TEST_CASE("plot renders svg files and rejects empty input") {
  const RunResult r = run("plot " + path_of("metrics.csv") +
                          " --metric nmse --out " + path_of("n.svg"));
  REQUIRE(r.code == 0);
  const std::string svg = slurp(path_of("n.svg"));
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(run("plot " + path_of("metrics.csv") + " --metric mpe --out " +
            path_of("m.svg"))
            .code == 0);

  std::ofstream f(path_of("empty.csv"));
  f << "method,snr_db,mpe_m,nmse,nmse_db,n\n";
  f.close();
  CHECK(run("plot " + path_of("empty.csv") + " --out " + path_of("x.svg"))
            .code == 2);
  CHECK(run("plot " + path_of("nope.csv")).code == 2);
}

TEST_CASE("config typos and alien files are rejected") {
  std::ofstream f(path_of("typo.json"));
  f << R"({"dataset": {"counts": 16}})";
  f.close();
  const RunResult r = run("gen --config " + path_of("typo.json"));
  CHECK(r.code == 2);
  CHECK(r.err.find("unknown key") != std::string::npos);
  CHECK(run("train " + path_of("cfg.json") + " --stage pos --config " +
            config_path())
            .code == 3);  // not a dataset container
}

TEST_CASE("the data directory env var supplies default output paths") {
  ::setenv("XLMIMO_DATA_DIR", work_dir().string().c_str(), 1);
  const RunResult r = run("plot " + path_of("metrics.csv") + " --metric mpe");
  ::unsetenv("XLMIMO_DATA_DIR");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(work_dir() / "plot_mpe.svg"));
}

TEST_SUITE_END();
