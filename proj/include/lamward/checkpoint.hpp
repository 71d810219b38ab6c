#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "lamward/controller.hpp"
#include "lamward/lam.hpp"

namespace lamward {

inline constexpr char kCheckpointMagic[8] = {'L', 'A', 'M', 'W', 'C', 'K', 'P', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Container: magic, version, config digest, then tagged sections ("bundle",
/// "controller", "provenance"). Sections with unknown tags are skipped on load.
struct Checkpoint {
  std::uint64_t digest = 0;
  std::string provenance;  // JSON object: tool version, config digest, seed
  std::optional<ModelBundle> bundle;
  std::optional<Controller> controller;
};

std::string encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(std::string data);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws FormatError when the file has no section of that kind.
ModelBundle load_bundle(const std::filesystem::path& path);
Controller load_controller(const std::filesystem::path& path);

/// Loads a bundle to continue training; throws FormatError when its digest
/// differs from `expected`.
ModelBundle resume_bundle(const std::filesystem::path& path, std::uint64_t expected);

/// "step,total,pred,reg,vq,dead_codes"
std::string loss_csv_header();
std::string loss_csv_row(const LossReport& r);

}  // namespace lamward
