#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace qdemu::io {

// Little-endian 32-bit float / unsigned blobs, independent of host order.
void write_f32(const std::filesystem::path& path, std::span<const float> values);
std::vector<float> read_f32(const std::filesystem::path& path);
void write_u32(const std::filesystem::path& path, std::span<const std::uint32_t> values);
std::vector<std::uint32_t> read_u32(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

// Thrown when an expected input artifact is absent; names the producer.
class MissingInput : public std::runtime_error {
 public:
  MissingInput(const std::filesystem::path& path, const std::string& producer);
};

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace qdemu::io
