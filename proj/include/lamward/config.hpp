#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "lamward/controller.hpp"
#include "lamward/encoder.hpp"
#include "lamward/evalsuite.hpp"
#include "lamward/lam.hpp"
#include "lamward/planner.hpp"
#include "lamward/sampler.hpp"
#include "lamward/worldgen.hpp"

namespace lamward {

inline constexpr const char* kToolVersion = "0.1.0";

struct DataCfg {
  std::size_t train_episodes = 512;
  std::size_t test_episodes = 128;
  std::uint64_t seed = 7;
  bool operator==(const DataCfg&) const = default;
};

struct RunConfig {
  WorldCfg world;
  EncoderCfg encoder;
  DataCfg data;
  ModelCfg model;
  TrainCfg train;
  std::uint64_t init_seed = 11;
  ControllerCfg controller;
  CemCfg cem;
  std::size_t plan_runs = 64;
  EvalOptions eval;
  SgldCfg sgld;
  std::string out = "out";

  /// Cross-field checks (grid sizes agree, dimensions line up, ...).
  void validate() const;
  bool operator==(const RunConfig&) const;
};

/// Canonical text form: JSON with sorted keys, two-space indent.
std::string config_to_text(const RunConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig config_from_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// FNV-1a over the canonical text.
std::uint64_t config_digest(const RunConfig& cfg);
/// Digest of the fields that determine a trained bundle (world, encoder,
/// data, model, train, init seed). Checkpoints carry this one.
std::uint64_t training_digest(const RunConfig& cfg);

std::string digest_hex(std::uint64_t d);

/// {"tool_version", "config_digest", "seed"} as a JSON object string.
std::string provenance_json(std::uint64_t digest, std::uint64_t seed);

}  // namespace lamward
