#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"({
  "world": {"grid": 8, "frames": 8, "n_sprites": 2, "sprite_min": 2, "sprite_max": 3, "camera_range": 1},
  "encoder": {"grid": 8, "repr_dim": 12},
  "data": {"train_episodes": 12, "test_episodes": 6},
  "model": {"latent_dim": 4, "hidden": 10, "blocks": 1, "reg": {"kind": "discrete", "codebook_size": 8, "reset_period": 5}},
  "train": {"steps": 20, "batch": 4, "lr": 0.003},
  "controller": {"steps": 20, "batch": 16, "hidden": 8, "embed": 8},
  "plan": {"runs": 2, "samples": 20, "elites": 4, "iterations": 3},
  "eval": {"pairs": 6},
  "sample": {"steps": 200, "thin": 2}
})";

struct Workspace {
  fs::path root;
  fs::path config;
  explicit Workspace(const std::string& name) : root(fs::temp_directory_path() / ("lamward_cli_" + name)) {
    fs::remove_all(root);
    fs::create_directories(root);
    config = root / "tiny.json";
    std::ofstream(config) << kTinyConfig;
  }
  ~Workspace() { fs::remove_all(root); }
};

int run(const std::string& args) {
  const std::string cmd = std::string(LAMWARD_CLI) + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string base(const Workspace& w, const fs::path& out) {
  return "--config " + w.config.string() + " --out " + out.string();
}

}  // namespace

TEST_CASE("gen-data is byte-identical across reruns") {
  Workspace w("gen");
  REQUIRE(run("gen-data " + base(w, w.root / "a")) == 0);
  REQUIRE(run("gen-data " + base(w, w.root / "b")) == 0);
  for (const char* f : {"train.lweps", "test.lweps"}) CHECK(slurp(w.root / "a" / f) == slurp(w.root / "b" / f));
  const auto m = nlohmann::json::parse(slurp(w.root / "a" / "manifest.json"));
  CHECK(m["episodes"] == 18);
  CHECK(m["provenance"].contains("config_digest"));
  REQUIRE(run("gen-data " + base(w, w.root / "c") + " --seed 99") == 0);
  CHECK(slurp(w.root / "a" / "train.lweps") != slurp(w.root / "c" / "train.lweps"));
}

TEST_CASE("bad inputs exit nonzero") {
  Workspace w("bad");
  const fs::path d = w.root / "d";
  REQUIRE(run("gen-data " + base(w, d)) == 0);
  std::string bytes = slurp(d / "train.lweps");
  bytes[0] = 'X';
  std::ofstream(d / "train.lweps", std::ios::binary) << bytes;
  CHECK(run("train " + base(w, d)) != 0);
  CHECK(run("frobnicate") != 0);
  CHECK(run("train --config " + (w.root / "missing.json").string()) != 0);
  std::ofstream(w.root / "typo.json") << R"({"trian": {}})";
  CHECK(run("gen-data --config " + (w.root / "typo.json").string() + " --out " + d.string()) != 0);
}

TEST_CASE("train, resume, evaluate, plan and sample") {
  Workspace w("pipeline");
  const fs::path d = w.root / "d", r = w.root / "r";
  REQUIRE(run("gen-data " + base(w, d)) == 0);
  REQUIRE(run("train " + base(w, d)) == 0);
  const std::string straight = slurp(d / "bundle.ckpt"), straight_csv = slurp(d / "loss.csv");

  REQUIRE(run("train " + base(w, r) + " --data " + d.string() + " --until 10") == 0);
  REQUIRE(run("train " + base(w, r) + " --data " + d.string() + " --checkpoint " + (r / "bundle.ckpt").string()) == 0);
  CHECK(slurp(r / "bundle.ckpt") == straight);
  CHECK(slurp(r / "loss.csv") == straight_csv);

  std::istringstream csv(straight_csv);
  std::string line;
  int rows = 0;
  while (std::getline(csv, line))
    if (!line.empty() && std::isdigit(static_cast<unsigned char>(line[0]))) ++rows;
  CHECK(rows == 20);

  std::ofstream(w.root / "other.json") << R"({"train": {"steps": 21}})";
  CHECK(run("train --config " + (w.root / "other.json").string() + " --out " + r.string() + " --data " + d.string() +
            " --checkpoint " + (r / "bundle.ckpt").string()) != 0);

  const std::string ck = " --checkpoint " + (d / "bundle.ckpt").string();
  for (const char* p : {"capacity", "leakage", "cycle"}) {
    REQUIRE(run(std::string("eval ") + base(w, d) + ck + " --protocol " + p) == 0);
    const std::string first = slurp(d / (std::string("eval_") + p + ".json"));
    REQUIRE(run(std::string("eval ") + base(w, d) + ck + " --protocol " + p) == 0);
    CHECK(slurp(d / (std::string("eval_") + p + ".json")) == first);
    const auto j = nlohmann::json::parse(first);
    CHECK(j["provenance"].contains("config_digest"));
    CHECK(fs::exists(d / (std::string("eval_") + p + "_plot.csv")));
  }

  CHECK(run("plan " + base(w, d) + ck) != 0);
  REQUIRE(run("train-controller " + base(w, d) + ck) == 0);
  REQUIRE(run("plan " + base(w, d) + ck + " --controller " + (d / "controller.ckpt").string() + " --preset manip") == 0);
  const std::string summary = slurp(d / "plan_summary.json");
  REQUIRE(run("plan " + base(w, d) + ck + " --controller " + (d / "controller.ckpt").string() + " --preset manip") == 0);
  CHECK(slurp(d / "plan_summary.json") == summary);
  CHECK(fs::exists(d / "plan" / "run_001.json"));

  REQUIRE(run("sample " + base(w, d) + ck + " --family discrete --count 7") == 0);
  std::istringstream samples(slurp(d / "samples_discrete.csv"));
  rows = 0;
  while (std::getline(samples, line))
    if (!line.empty() && (std::isdigit(static_cast<unsigned char>(line[0])) || line[0] == '-')) ++rows;
  CHECK(rows == 7);
  CHECK(run("sample " + base(w, d) + ck + " --family sparse --count 5") == 0);
}
