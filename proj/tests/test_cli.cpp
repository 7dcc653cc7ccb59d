#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "pgwm/guidance/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

#ifndef PGWM_CLI_PATH
#error "PGWM_CLI_PATH must be defined"
#endif

const fs::path &work_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "pgwm_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run_cli(const std::string &args, std::string *output = nullptr) {
  const fs::path log = work_dir() / "cli_output.txt";
  const std::string cmd =
      std::string(PGWM_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  if (output) {
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    *output = ss.str();
  }
  return WEXITSTATUS(rc);
}

fs::path write_micro_config(const std::string &name, const std::string &out_root) {
  json j;
  j["data"] = {{"volume_seed", 5}, {"volume_size", 48},   {"image_h", 64},
               {"image_w", 64},    {"pixel_spacing", 0.3}, {"train_scans", 2},
               {"test_scans", 1},  {"frames_per_scan", 64}};
  j["masks"] = {{"num_targets", 2}, {"target_scale", {0.12, 0.2}}};
  j["encoder"] = {{"depth", 1}, {"hidden_dim", 16}, {"num_heads", 2}, {"patch_size", 8},
                  {"image_size", 64}};
  j["predictor"] = {{"depth", 1}, {"hidden_dim", 16}, {"num_heads", 2}};
  j["pretrain"] = {{"epochs", 2}, {"batch_size", 16}, {"warmup_epochs", 1},
                   {"num_workers", 1}, {"seed", 3}};
  j["guidance"] = {{"epochs", 1},      {"batch_size", 32}, {"train_stride", 8},
                   {"eval_stride", 8}, {"num_workers", 1}, {"seed", 3}};
  j["out_root"] = out_root;
  const fs::path p = work_dir() / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

TEST_CASE("shipped desk config declares the desk dataset shape") {
  json j;
  std::ifstream in(std::string(PGWM_CONFIG_DIR) + "/desk.json");
  REQUIRE(in.good());
  in >> j;
  CHECK(j["data"]["train_scans"] == 8);
  CHECK(j["data"]["test_scans"] == 3);
  CHECK(j["data"]["frames_per_scan"] == 512);
  CHECK(j["data"]["image_h"] == 64);
  CHECK(j["data"]["image_w"] == 64);
  CHECK(j["pretrain"]["epochs"] == 20);
  CHECK(j["pretrain"]["batch_size"] == 64);
  CHECK(double(j["pretrain"]["lr_start"]) == 1e-4);
  CHECK(double(j["pretrain"]["lr_peak"]) == 5e-4);
  CHECK(double(j["pretrain"]["lr_final"]) == 5e-7);
}

TEST_CASE("missing config file fails with an explicit path error") {
  std::string out;
  const int rc = run_cli("gen-data --config /nonexistent/cfg.json", &out);
  CHECK(rc != 0);
  CHECK(out.find("error:") != std::string::npos);
  CHECK(out.find("/nonexistent/cfg.json") != std::string::npos);
}

TEST_CASE("gen-data writes a manifest listing both splits") {
  const fs::path out_root = work_dir() / "gen1";
  const fs::path cfg = write_micro_config("gen1.json", out_root.string());
  std::string out;
  REQUIRE(run_cli("gen-data --config " + cfg.string(), &out) == 0);
  CHECK(out.find("2 train / 1 test") != std::string::npos);

  json manifest;
  std::ifstream(out_root / "dataset" / "manifest.json") >> manifest;
  int train = 0, test = 0;
  for (const auto &s : manifest["scans"]) {
    if (s["split"] == "train") ++train;
    if (s["split"] == "test") ++test;
  }
  CHECK(train == 2);
  CHECK(test == 1);
  CHECK(manifest["total_frames"] == 3 * 64);
}

TEST_CASE("gen-data refuses to overwrite without force and is seed-reproducible") {
  const fs::path out_root = work_dir() / "gen2";
  const fs::path cfg = write_micro_config("gen2.json", out_root.string());
  REQUIRE(run_cli("gen-data --config " + cfg.string() + " --seed 11") == 0);
  const std::string manifest1 = slurp(out_root / "dataset" / "manifest.json");

  std::string out;
  CHECK(run_cli("gen-data --config " + cfg.string() + " --seed 11", &out) != 0);
  CHECK(out.find("error:") != std::string::npos);

  REQUIRE(run_cli("gen-data --config " + cfg.string() + " --seed 11 --force") == 0);
  CHECK(slurp(out_root / "dataset" / "manifest.json") == manifest1);
}

TEST_CASE("oracle evaluation reports all-zero MAE") {
  const fs::path out_root = work_dir() / "oracle";
  const fs::path cfg = write_micro_config("oracle.json", out_root.string());
  REQUIRE(run_cli("gen-data --config " + cfg.string()) == 0);
  REQUIRE(run_cli("eval --config " + cfg.string() + " --oracle --report " +
                  (out_root / "oracle_report").string()) == 0);
  auto report = pgwm::MaeReport::read_json(out_root / "oracle_report.json");
  for (int a = 0; a < 6; ++a) CHECK(report.overall[a] == 0.0);
  CHECK(report.mode_tag == "oracle");
}

TEST_CASE("missing checkpoint surfaces an explicit error") {
  const fs::path out_root = work_dir() / "missing_ckpt";
  const fs::path cfg = write_micro_config("mc.json", out_root.string());
  REQUIRE(run_cli("gen-data --config " + cfg.string()) == 0);
  std::string out;
  CHECK(run_cli("finetune --config " + cfg.string() + " --from /no/such/ckpt", &out) != 0);
  CHECK(out.find("error:") != std::string::npos);
}

TEST_CASE("full cli pipeline with compare table") {
  const fs::path out_root = work_dir() / "pipe";
  const fs::path cfg = write_micro_config("pipe.json", out_root.string());
  REQUIRE(run_cli("gen-data --config " + cfg.string()) == 0);
  REQUIRE(run_cli("pretrain --config " + cfg.string()) == 0);

  // find the final checkpoint
  fs::path ckpt;
  for (const auto &e : fs::directory_iterator(out_root / "pretrain_joint_seed3"))
    if (e.is_directory() && e.path().filename().string().rfind("ckpt_", 0) == 0) ckpt = e.path();
  REQUIRE_FALSE(ckpt.empty());

  REQUIRE(run_cli("finetune --config " + cfg.string() + " --from " + ckpt.string() +
                  " --name warm") == 0);
  REQUIRE(run_cli("finetune --config " + cfg.string() + " --name cold") == 0);
  REQUIRE(run_cli("eval --config " + cfg.string() + " --model " +
                  (out_root / "warm" / "model").string() + " --report " +
                  (out_root / "warm_report").string()) == 0);
  REQUIRE(run_cli("eval --config " + cfg.string() + " --model " +
                  (out_root / "cold" / "model").string() + " --report " +
                  (out_root / "cold_report").string()) == 0);

  std::string table;
  REQUIRE(run_cli("eval --compare " + (out_root / "cold_report.json").string() + " " +
                  (out_root / "warm_report.json").string(), &table) == 0);
  CHECK(table.find("plane") != std::string::npos);
  CHECK(table.find('%') != std::string::npos);
  // negative-is-better convention: the sign column is present
  CHECK((table.find('-') != std::string::npos || table.find('+') != std::string::npos));
}

TEST_CASE("ablation reruns with identical seeds produce identical summaries") {
  const fs::path out_root = work_dir() / "ab";
  const fs::path cfg = write_micro_config("ab.json", out_root.string());
  REQUIRE(run_cli("gen-data --config " + cfg.string()) == 0);
  REQUIRE(run_cli("ablate --config " + cfg.string() + " --seeds 1") == 0);
  const std::string first = slurp(out_root / "ablation" / "summary.csv");
  REQUIRE_FALSE(first.empty());
  CHECK(fs::exists(out_root / "ablation" / "ablation_report.svg"));

  // --force reruns everything from scratch; same seeds -> same bytes
  REQUIRE(run_cli("ablate --config " + cfg.string() + " --seeds 1 --force") == 0);
  CHECK(slurp(out_root / "ablation" / "summary.csv") == first);

  // resume path: a partial rerun reuses completed artifacts
  fs::remove_all(out_root / "ablation" / "finetune_joint_seed3");
  std::string out;
  REQUIRE(run_cli("ablate --config " + cfg.string() + " --seeds 1", &out) == 0);
  CHECK(out.find("reusing") != std::string::npos);
  CHECK(slurp(out_root / "ablation" / "summary.csv") == first);

  // 4 variants x 1 seed x (4 planes + all) x 6 axes rows + header
  std::stringstream ss(first);
  std::string line;
  int rows = -1;
  while (std::getline(ss, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 4 * 5 * 6);

  // plot re-rendering from the summary
  REQUIRE(run_cli("plot --summary " + (out_root / "ablation" / "summary.csv").string() +
                  " --out " + (out_root / "replot.svg").string()) == 0);
  CHECK(fs::exists(out_root / "replot.svg"));
}
