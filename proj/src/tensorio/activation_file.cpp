// SPDX-License-Identifier: Apache-2.0
#include "tensorio/activation_file.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "common/encoding.hpp"
#include "common/error.hpp"

namespace truthlens::tensorio {
namespace {

void put_u16(std::array<uint8_t, kHeaderSize>& h, size_t at, uint16_t v) {
  h[at] = uint8_t(v);
  h[at + 1] = uint8_t(v >> 8);
}

void put_u32(std::array<uint8_t, kHeaderSize>& h, size_t at, uint32_t v) {
  for (int i = 0; i < 4; ++i) h[at + i] = uint8_t(v >> (8 * i));
}

uint16_t get_u16(const uint8_t* p) { return uint16_t(p[0] | (p[1] << 8)); }

uint32_t get_u32(const uint8_t* p) {
  return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
}

HeaderInfo parse_header(const uint8_t* h, size_t available, const std::string& name) {
  if (available < kMagic.size() || std::memcmp(h, kMagic.data(), kMagic.size()) != 0)
    fail(ErrorCode::kBadMagic, fmt::format("'{}' is not an activation file", name));
  if (available < kHeaderSize)
    fail(ErrorCode::kLengthMismatch, fmt::format("'{}': truncated header ({} bytes)", name, available));
  const uint16_t version = get_u16(h + 4);
  if (version != kVersion)
    fail(ErrorCode::kVersionMismatch, fmt::format("'{}': unsupported activation format version {}", name, version));
  if (h[6] != kDtypeF32) fail(ErrorCode::kFormat, fmt::format("'{}': unsupported dtype code {}", name, h[6]));
  return {get_u16(h + 7), get_u32(h + 9), get_u32(h + 13)};
}

std::vector<uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, fmt::format("cannot open '{}'", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void ActivationBatch::validate() const {
  require(n > 0 && d > 0, "activation batch must have n > 0 and d > 0");
  require(n <= UINT32_MAX && d <= UINT32_MAX, "activation batch dimensions exceed 32 bits");
  require(layer <= UINT16_MAX, fmt::format("layer {} does not fit the 16-bit header field", layer));
  require(data.size() == n * d, fmt::format("activation data has {} values, expected {}x{}", data.size(), n, d));
  require(example_ids.size() == n, fmt::format("{} example ids for {} rows", example_ids.size(), n));
  std::unordered_set<int64_t> seen;
  for (const auto id : example_ids)
    require(seen.insert(id).second, fmt::format("duplicate example id {}", id));
  for (size_t i = 0; i < data.size(); ++i)
    if (!std::isfinite(data[i]))
      fail(ErrorCode::kNonFinite, fmt::format("non-finite activation at row {}, column {}", i / d, i % d));
}

std::string activation_file_name(std::string_view task, std::string_view prompt, uint32_t layer) {
  return fmt::format("{}.{}.layer{:02}.actv", task, prompt, layer);
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".meta.json");
}

void write_activations(const ActivationBatch& batch, const std::filesystem::path& path) {
  batch.validate();
  std::array<uint8_t, kHeaderSize> header{};
  std::memcpy(header.data(), kMagic.data(), kMagic.size());
  put_u16(header, 4, kVersion);
  header[6] = kDtypeF32;
  put_u16(header, 7, static_cast<uint16_t>(batch.layer));
  put_u32(header, 9, static_cast<uint32_t>(batch.n));
  put_u32(header, 13, static_cast<uint32_t>(batch.d));
  const auto payload = pack_f32le(batch.data);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, fmt::format("cannot write '{}'", path.string()));
    out.write(reinterpret_cast<const char*>(header.data()), header.size());
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (!out) fail(ErrorCode::kIo, fmt::format("write failed for '{}'", path.string()));
  }
  nlohmann::ordered_json meta;
  meta["task"] = batch.task;
  meta["prompt"] = batch.prompt;
  meta["model"] = batch.model;
  meta["layer"] = batch.layer;
  meta["example_ids"] = batch.example_ids;
  std::ofstream side(sidecar_path(path), std::ios::binary | std::ios::trunc);
  if (!side) fail(ErrorCode::kIo, fmt::format("cannot write '{}'", sidecar_path(path).string()));
  side << meta.dump() << '\n';
  if (!side) fail(ErrorCode::kIo, fmt::format("write failed for '{}'", sidecar_path(path).string()));
}

HeaderInfo read_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, fmt::format("cannot open '{}'", path.string()));
  std::array<uint8_t, kHeaderSize> h{};
  in.read(reinterpret_cast<char*>(h.data()), h.size());
  return parse_header(h.data(), static_cast<size_t>(in.gcount()), path.string());
}

ActivationBatch read_activations(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const auto info = parse_header(bytes.data(), bytes.size(), path.string());
  const uint64_t expected = uint64_t{info.n} * info.d * 4;
  const uint64_t actual = bytes.size() - kHeaderSize;
  if (actual != expected)
    fail(ErrorCode::kLengthMismatch,
         fmt::format("'{}': header declares {}x{} float32 ({} bytes) but payload has {} bytes", path.string(), info.n,
                     info.d, expected, actual));
  ActivationBatch batch;
  batch.layer = info.layer;
  batch.n = info.n;
  batch.d = info.d;
  batch.data = unpack_f32le(std::span(bytes).subspan(kHeaderSize));
  for (size_t i = 0; i < batch.data.size(); ++i)
    if (!std::isfinite(batch.data[i]))
      fail(ErrorCode::kNonFinite, fmt::format("'{}': non-finite value at row {}, column {}", path.string(),
                                              i / batch.d, i % batch.d));

  const auto side_path = sidecar_path(path);
  std::ifstream side(side_path);
  if (!side) fail(ErrorCode::kIo, fmt::format("missing sidecar '{}'", side_path.string()));
  try {
    const auto meta = nlohmann::json::parse(side);
    batch.task = meta.at("task").get<std::string>();
    batch.prompt = meta.at("prompt").get<std::string>();
    batch.model = meta.value("model", std::string());
    batch.example_ids = meta.at("example_ids").get<std::vector<int64_t>>();
    if (meta.at("layer").get<uint32_t>() != batch.layer)
      fail(ErrorCode::kFormat, fmt::format("'{}': sidecar layer does not match header", side_path.string()));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, fmt::format("'{}': {}", side_path.string(), e.what()));
  }
  if (batch.example_ids.size() != batch.n)
    fail(ErrorCode::kLengthMismatch, fmt::format("'{}': {} example ids for {} rows", side_path.string(),
                                                 batch.example_ids.size(), batch.n));
  batch.validate();
  return batch;
}

}  // namespace truthlens::tensorio
