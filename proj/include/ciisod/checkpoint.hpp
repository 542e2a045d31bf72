#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ciisod/model.hpp"

namespace ciisod {

// Layout (all integers u32 little-endian, values f32 little-endian):
//   "CIISOD01" | version | config_len | config JSON bytes | entry_count |
//   per entry: name_len | name | rank | dims[rank] | values
inline constexpr char kCheckpointMagic[] = "CIISOD01";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

struct Checkpoint {
  std::string model_config;  // JSON; empty when unknown
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry* find(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError naming the byte offset of the first problem.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

template <class T>
Checkpoint snapshot(SaliencyModel<T>& model);

/// All-or-nothing: every entry is checked before anything is written. A
/// missing, extra or reshaped entry raises FormatError naming the first one.
template <class T>
void restore(SaliencyModel<T>& model, const Checkpoint& ckpt);

template <class T>
void save_checkpoint(SaliencyModel<T>& model, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Rebuilds the model from the embedded config and restores its state.
template <class T>
SaliencyModel<T> load_model(const std::filesystem::path& path);

}  // namespace ciisod
