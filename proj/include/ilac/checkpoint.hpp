#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "ilac/model.hpp"
#include "ilac/training.hpp"

namespace ilac {

inline constexpr const char* kCheckpointFormat = "ilac-checkpoint/1";
inline constexpr char kCheckpointMagic[8] = {'I', 'L', 'A', 'C', 'C', 'K', 'P', 'T'};

enum class FloatWidth { kF32 = 32, kF64 = 64 };

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  std::optional<AdamState> adam;  // present when the file can resume training
  std::size_t epochs_done = 0;
  nlohmann::json meta = nlohmann::json::object();  // free-form provenance (train config, corpus spec)
};

// Layout: 8-byte magic, little-endian uint64 header length, JSON header
// (format, float width, config, array names and shapes), then the arrays
// row-major and little-endian in header order: parameters in declaration
// order, followed by Adam first and second moments when present.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt, FloatWidth width = FloatWidth::kF64);
std::string serialize_checkpoint(const Checkpoint& ckpt, FloatWidth width = FloatWidth::kF64);

// Throws VersionError for a foreign magic/format or a header that disagrees
// with the stored arrays, and InputError for I/O problems.
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint deserialize_checkpoint(const std::string& bytes);

}  // namespace ilac
