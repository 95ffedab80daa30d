// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace truthlens::tensorio {

/// N x d residual-stream vectors for one (task, prompt, layer). Row i is the
/// activation of statement example_ids[i].
struct ActivationBatch {
  uint32_t layer = 0;
  size_t n = 0;
  size_t d = 0;
  std::vector<float> data;  // row-major, n * d
  std::vector<int64_t> example_ids;
  std::string task;
  std::string prompt;
  std::string model;

  std::span<const float> row(size_t i) const { return {data.data() + i * d, d}; }

  /// Throws Error(kInvalidArgument) on shape problems, duplicate ids or a
  /// layer that does not fit the header; Error(kNonFinite) on NaN/Inf.
  void validate() const;
};

// On-disk layout, all little-endian:
//   0  char[4] "ACTV"
//   4  u16     version (1)
//   6  u8      dtype (0 = float32)
//   7  u16     layer
//   9  u32     n
//  13  u32     d
//  17  f32[n*d] row-major payload
inline constexpr std::string_view kMagic = "ACTV";
inline constexpr uint16_t kVersion = 1;
inline constexpr uint8_t kDtypeF32 = 0;
inline constexpr size_t kHeaderSize = 17;

std::string activation_file_name(std::string_view task, std::string_view prompt, uint32_t layer);
std::filesystem::path sidecar_path(const std::filesystem::path& path);

/// Writes the binary file and its "{path}.meta.json" sidecar
/// {task, prompt, model, layer, example_ids}.
void write_activations(const ActivationBatch& batch, const std::filesystem::path& path);

/// Reads and validates a file plus sidecar. Distinct error codes for a bad
/// magic (kBadMagic), unsupported version (kVersionMismatch), payload size
/// not matching the header (kLengthMismatch) and NaN/Inf entries (kNonFinite).
ActivationBatch read_activations(const std::filesystem::path& path);

/// Header-only probe of an activation file: (layer, n, d).
struct HeaderInfo {
  uint32_t layer;
  uint32_t n;
  uint32_t d;
};
HeaderInfo read_header(const std::filesystem::path& path);

}  // namespace truthlens::tensorio
