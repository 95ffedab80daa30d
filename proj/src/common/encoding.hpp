// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace truthlens {

std::string base64_encode(std::span<const uint8_t> bytes);

/// Throws Error(kFormat) on characters outside the standard alphabet or bad padding.
std::vector<uint8_t> base64_decode(std::string_view text);

/// Little-endian float32 packing, independent of host byte order.
std::vector<uint8_t> pack_f32le(std::span<const float> values);
std::vector<float> unpack_f32le(std::span<const uint8_t> bytes);

uint64_t fnv1a64(std::string_view data, uint64_t basis = 0xcbf29ce484222325ULL);
uint64_t fnv1a64(std::span<const uint8_t> data, uint64_t basis = 0xcbf29ce484222325ULL);

std::string hex64(uint64_t value);

}  // namespace truthlens
