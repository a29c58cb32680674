#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

// COLABEL_CLI_PATH is injected by the build so these tests exercise the real
// binary end to end, exit codes included.
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr interleaved
};

RunResult run(const std::string& cmd) {
  RunResult r;
  FILE* pipe = ::popen((cmd + " 2>&1").c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) r.output.append(buf, n);
  int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

RunResult run_cli(const std::string& args) { return run(std::string(COLABEL_CLI_PATH) + " " + args); }

fs::path fresh_dir(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("colabel_cli_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small sparse-annotation problem that trains in a couple of seconds.
std::string tiny_config(const fs::path& out_dir, bool complete = false) {
  std::ostringstream ss;
  ss << R"({
  "seed": 11,
  "out": ")" << out_dir.string() << R"(",
  "variant": ")" << (complete ? "tcls" : "tcl") << R"(",
  "simulate": {
    "classes": 3,
    "feature_dim": 2,
    "n_untrusted": 180,
    "n_trusted": 36,
    "labels_per_instance": )" << (complete ? 0 : 2) << R"(,
    "trusted_annotations": )" << (complete ? "true" : "false") << R"(,
    "annotators": [
      {"kind": "symmetric", "eps": 0.3},
      {"kind": "symmetric", "eps": 0.45},
      {"kind": "pair", "eps": 0.4}
    ]
  },
  "train": {"iterations": 2, "retrain_epochs": 10, "validation_size": 40}
})";
  return ss.str();
}

}  // namespace

TEST_CASE("bare invocation asks for a subcommand and fails validation") {
  auto r = run_cli("");
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("subcommand") != std::string::npos);
}

TEST_CASE("help exits cleanly") {
  auto r = run_cli("--help");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("train") != std::string::npos);
  CHECK(r.output.find("simulate") != std::string::npos);
}

TEST_CASE("missing config file is a validation failure") {
  auto r = run_cli("train --config /nonexistent/conf.json");
  CHECK(r.exit_code == 1);
}

TEST_CASE("unknown config keys fail loud") {
  auto dir = fresh_dir("badkey");
  write_file(dir / "c.json", R"({"seed": 1, "simulat": {}})");
  auto r = run_cli("train --config " + (dir / "c.json").string());
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("simulat") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("malformed json is a validation failure") {
  auto dir = fresh_dir("badjson");
  write_file(dir / "c.json", "{nope");
  auto r = run_cli("train --config " + (dir / "c.json").string());
  CHECK(r.exit_code == 1);
  fs::remove_all(dir);
}

TEST_CASE("simulate writes the dataset files") {
  auto dir = fresh_dir("simulate");
  write_file(dir / "c.json", tiny_config(dir / "out"));
  auto r = run_cli("simulate --config " + (dir / "c.json").string());
  CHECK(r.exit_code == 0);
  for (const char* name : {"features.csv", "annotations.csv", "trusted.csv", "truth.csv"})
    CHECK(fs::exists(dir / "out" / name));
  // Per-annotator summary on stdout.
  CHECK(r.output.find("annotator") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("train produces the full artifact set and is byte deterministic") {
  auto dir = fresh_dir("train");
  write_file(dir / "c.json", tiny_config(dir / "out_a"));
  auto a = run_cli("train --config " + (dir / "c.json").string());
  CHECK(a.exit_code == 0);
  for (const char* name :
       {"metrics.csv", "colabels.csv", "checkpoint.json", "confusions.json",
        "reliability_bins.csv"})
    CHECK(fs::exists(dir / "out_a" / name));

  auto b = run_cli("train --config " + (dir / "c.json").string() + " --out " +
                   (dir / "out_b").string());
  CHECK(b.exit_code == 0);
  CHECK(read_file(dir / "out_a" / "metrics.csv") == read_file(dir / "out_b" / "metrics.csv"));
  CHECK(read_file(dir / "out_a" / "colabels.csv") == read_file(dir / "out_b" / "colabels.csv"));

  // A different seed must change the metrics.
  auto c = run_cli("train --config " + (dir / "c.json").string() + " --seed 99 --out " +
                   (dir / "out_c").string());
  CHECK(c.exit_code == 0);
  CHECK(read_file(dir / "out_a" / "metrics.csv") != read_file(dir / "out_c" / "metrics.csv"));
  fs::remove_all(dir);
}

TEST_CASE("complete-data variant rejects sparse annotations at runtime") {
  auto dir = fresh_dir("tcls_sparse");
  write_file(dir / "c.json", tiny_config(dir / "out"));
  auto r = run_cli("train --config " + (dir / "c.json").string() + " --variant tcls");
  CHECK(r.exit_code == 1);
  fs::remove_all(dir);
}

TEST_CASE("complete-data variant trains and saves the aggregator") {
  auto dir = fresh_dir("tcls");
  write_file(dir / "c.json", tiny_config(dir / "out", /*complete=*/true));
  auto r = run_cli("train --config " + (dir / "c.json").string());
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(dir / "out" / "aggregator_checkpoint.json"));
  CHECK_FALSE(fs::exists(dir / "out" / "confusions.json"));
  fs::remove_all(dir);
}

TEST_CASE("evaluate scores a checkpoint against labeled features") {
  auto dir = fresh_dir("evaluate");
  write_file(dir / "c.json", tiny_config(dir / "out"));
  auto t = run_cli("train --config " + (dir / "c.json").string());
  REQUIRE(t.exit_code == 0);
  auto data = dir / "out" / "dataset";
  auto r = run_cli("evaluate --checkpoint " + (dir / "out" / "checkpoint.json").string() +
                   " --features " + (data / "features.csv").string() + " --labels " +
                   (data / "truth.csv").string() + " --out " + (dir / "eval").string());
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(dir / "eval" / "evaluation.csv"));
  auto report = read_file(dir / "eval" / "evaluation.csv");
  CHECK(report.find("accuracy") != std::string::npos);
  CHECK(report.find("ece") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("unwritable output directory is a runtime failure") {
  auto dir = fresh_dir("unwritable");
  write_file(dir / "c.json", tiny_config(dir / "out"));
  auto r = run_cli("train --config " + (dir / "c.json").string() + " --out /dev/null/x");
  CHECK(r.exit_code == 2);
  fs::remove_all(dir);
}

TEST_CASE("bad ablate override value fails validation") {
  auto dir = fresh_dir("ablate_bad");
  write_file(dir / "c.json", tiny_config(dir / "out"));
  auto r = run_cli("train --config " + (dir / "c.json").string() + " --ablate calibration=maybe");
  CHECK(r.exit_code == 1);
  auto r2 = run_cli("train --config " + (dir / "c.json").string() + " --ablate bogus=1");
  CHECK(r2.exit_code == 1);
  fs::remove_all(dir);
}

TEST_CASE("calibration ablation compares on and off cells") {
  auto dir = fresh_dir("ablate");
  std::string cfg = tiny_config(dir / "out");
  cfg.insert(cfg.rfind('}'), R"(, "ablate": {"axis": "calibration"})");
  write_file(dir / "c.json", cfg);
  auto r = run_cli("ablate --config " + (dir / "c.json").string());
  CHECK(r.exit_code == 0);
  REQUIRE(fs::exists(dir / "out" / "ablation_report.csv"));
  auto report = read_file(dir / "out" / "ablation_report.csv");
  CHECK(report.find("cell,colabel_acc,val_acc,ece_pre,ece_post") != std::string::npos);
  CHECK(report.find("calibration=on") != std::string::npos);
  CHECK(report.find("calibration=off") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("debug logging goes to stderr when COLABEL_LOG asks for it") {
  auto dir = fresh_dir("logging");
  write_file(dir / "c.json", tiny_config(dir / "out"));
  auto quiet = run("COLABEL_LOG=warn " + std::string(COLABEL_CLI_PATH) + " simulate --config " +
                   (dir / "c.json").string());
  CHECK(quiet.exit_code == 0);
  CHECK(quiet.output.find("[debug]") == std::string::npos);
  auto chatty = run("COLABEL_LOG=debug " + std::string(COLABEL_CLI_PATH) + " simulate --config " +
                    (dir / "c.json").string() + " --out " + (dir / "out2").string());
  CHECK(chatty.exit_code == 0);
  CHECK(chatty.output.find("[debug]") != std::string::npos);
  fs::remove_all(dir);
}
