// End-to-end exercises of the command-line interface; the binary path is
// provided via the IFO_BIN environment variable by the test harness.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

std::string binary() {
  const char* bin = std::getenv("IFO_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "IFO_BIN must point at the cli binary");
  return bin;
}

int run(const std::string& args) {
  const std::string cmd = binary() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "missing file: " << p.string());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("ifo_cli_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

// Small config so the pipeline commands finish in seconds.
std::string write_tiny_config(const TempDir& dir) {
  const fs::path p = dir.path / "tiny.json";
  std::ofstream out(p);
  out << R"({
    "profile": "desk",
    "n_trajectories": 8,
    "episode_steps": 6,
    "n_pretrain": 2,
    "batch_pairs": 3,
    "holdout_fraction": 0.25,
    "n_pi": 48,
    "n_train": 32,
    "n_update": 8,
    "warmup_steps": 48,
    "rl_batch": 16,
    "interact_batch_pairs": 2,
    "seq_negatives": 2,
    "eval_episodes": 3,
    "eval_interval": 100,
    "seed": 3
  })";
  return p.string();
}

}  // namespace

TEST_CASE("config init writes a loadable default configuration") {
  TempDir dir("config");
  CHECK(run("config init --out-dir " + dir.str()) == 0);
  const std::string text = read_file(dir.path / "run_config.json");
  CHECK(text.find("\"profile\": \"desk\"") != std::string::npos);
  CHECK(run("config init --profile paper --out-dir " + dir.str()) == 0);
  CHECK(read_file(dir.path / "run_config.json").find("5000") != std::string::npos);
  CHECK(run("config init --profile nope --out-dir " + dir.str()) == 2);
}

TEST_CASE("generate is deterministic and validates arguments") {
  TempDir dir("generate");
  const std::string common =
      " --env point_reach --policy expert --n 4 --t 6 --seed 7 --out-dir " + dir.str();
  CHECK(run("generate" + common + " --out a.ifods") == 0);
  CHECK(run("generate" + common + " --out b.ifods") == 0);
  CHECK(read_file(dir.path / "a.ifods") == read_file(dir.path / "b.ifods"));

  CHECK(run("generate --n 0" + std::string(" --out-dir ") + dir.str()) == 2);
  CHECK(run("generate --t 1 --out-dir " + dir.str()) == 2);
  CHECK(run("generate --env mars --out-dir " + dir.str()) == 2);
  CHECK(run("totally-unknown-command") == 2);
}

TEST_CASE("align, train, eval and export run end to end deterministically") {
  TempDir dir("pipeline");
  const std::string cfg = write_tiny_config(dir);
  const std::string gen_common = " --config " + cfg + " --out-dir " + dir.str();

  REQUIRE(run("generate --policy expert --n 8 --t 6 --seed 3 --out expert.ifods" +
              gen_common) == 0);
  REQUIRE(run("generate --policy random --n 8 --t 6 --seed 4 --out random.ifods" +
              gen_common) == 0);

  // Alignment twice into separate directories: identical artifacts.
  for (const char* sub : {"a1", "a2"}) {
    fs::create_directories(dir.path / sub);
    REQUIRE(run("align --expert " + (dir.path / "expert.ifods").string() +
                " --random " + (dir.path / "random.ifods").string() +
                " --config " + cfg + " --out-dir " + (dir.path / sub).string()) == 0);
  }
  CHECK(read_file(dir.path / "a1" / "align_ckpt.ifoc") ==
        read_file(dir.path / "a2" / "align_ckpt.ifoc"));
  CHECK(read_file(dir.path / "a1" / "align_metrics.csv") ==
        read_file(dir.path / "a2" / "align_metrics.csv"));

  // Metrics: one comment, one header, one row per epoch with 7 columns.
  const std::string metrics = read_file(dir.path / "a1" / "align_metrics.csv");
  CHECK(count_lines(metrics) == 2 + 2);
  std::istringstream lines(metrics);
  std::string line;
  std::getline(lines, line);  // comment
  std::getline(lines, line);
  CHECK(line == "step,l_triplet,l_ae,l_s,l_z,l_o,l_total");
  std::getline(lines, line);
  CHECK(std::count(line.begin(), line.end(), ',') == 6);

  const std::string sep = read_file(dir.path / "a1" / "separation_report.csv");
  CHECK(sep.find("untrained,") != std::string::npos);
  CHECK(sep.find("aligned,") != std::string::npos);

  // Training twice: identical metrics and checkpoints.
  for (const char* sub : {"t1", "t2"}) {
    fs::create_directories(dir.path / sub);
    REQUIRE(run("train --expert " + (dir.path / "expert.ifods").string() +
                " --checkpoint " + (dir.path / "a1" / "align_ckpt.ifoc").string() +
                " --config " + cfg + " --out-dir " + (dir.path / sub).string()) == 0);
  }
  CHECK(read_file(dir.path / "t1" / "train_metrics.csv") ==
        read_file(dir.path / "t2" / "train_metrics.csv"));
  CHECK(read_file(dir.path / "t1" / "agent_ckpt.ifoc") ==
        read_file(dir.path / "t2" / "agent_ckpt.ifoc"));
  CHECK(read_file(dir.path / "t1" / "bundle_ckpt.ifoc") ==
        read_file(dir.path / "t2" / "bundle_ckpt.ifoc"));

  // The no-alignment flag is recorded in the metrics header.
  fs::create_directories(dir.path / "tna");
  REQUIRE(run("train --expert " + (dir.path / "expert.ifods").string() +
              " --no-alignment --config " + cfg + " --out-dir " +
              (dir.path / "tna").string()) == 0);
  CHECK(read_file(dir.path / "tna" / "train_metrics.csv").find("no_alignment=1") !=
        std::string::npos);
  CHECK(read_file(dir.path / "t1" / "train_metrics.csv").find("no_alignment=0") !=
        std::string::npos);

  // Reference-policy evaluation pins the scaled-return anchors.
  fs::create_directories(dir.path / "ev");
  REQUIRE(run("eval --policy expert --episodes 4 --config " + cfg +
              " --out-dir " + (dir.path / "ev").string()) == 0);
  std::string report = read_file(dir.path / "ev" / "eval_report.csv");
  CHECK(report.find("expert,4,") != std::string::npos);
  CHECK(count_lines(report) == 2);
  REQUIRE(run("eval --policy agent --checkpoint " +
              (dir.path / "t1" / "agent_ckpt.ifoc").string() + " --episodes 3" +
              " --config " + cfg + " --out-dir " + (dir.path / "ev").string()) == 0);

  // Embedding export: header plus one row per trajectory, reproducible.
  fs::create_directories(dir.path / "em");
  const std::string export_cmd =
      "export-embeddings --checkpoint " +
      (dir.path / "a1" / "align_ckpt.ifoc").string() + " --dataset " +
      (dir.path / "expert.ifods").string() + " --config " + cfg + " --out-dir " +
      (dir.path / "em").string();
  REQUIRE(run(export_cmd) == 0);
  const std::string emb1 = read_file(dir.path / "em" / "embeddings.csv");
  CHECK(count_lines(emb1) == 1 + 8);
  std::istringstream emb_lines(emb1);
  std::getline(emb_lines, line);
  CHECK(std::count(line.begin(), line.end(), ',') == 128);  // label + z0..z127
  REQUIRE(run(export_cmd) == 0);
  CHECK(read_file(dir.path / "em" / "embeddings.csv") == emb1);
}

TEST_CASE("error paths use the documented exit codes") {
  TempDir dir("errors");
  const std::string cfg = write_tiny_config(dir);
  // Missing input files: runtime error.
  CHECK(run("align --expert /nope.ifods --random /nope2.ifods --out-dir " +
            dir.str()) == 1);
  CHECK(run("train --expert /nope.ifods --no-alignment --out-dir " + dir.str()) == 1);
  // Config parse problems: usage error.
  const fs::path bad = dir.path / "bad.json";
  std::ofstream(bad) << "{broken";
  CHECK(run("generate --config " + bad.string() + " --out-dir " + dir.str()) == 2);
  // Locked output directory: runtime error.
  std::ofstream(dir.path / ".ifo.lock") << "held\n";
  CHECK(run("generate --n 2 --t 6 --out-dir " + dir.str()) == 1);
}
