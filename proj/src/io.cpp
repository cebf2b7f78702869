#include "qdemu/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace qdemu::io {
namespace {

template <typename T>
void write_le(const std::filesystem::path& path, std::span<const T> values) {
  static_assert(sizeof(T) == 4);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * 4));
  } else {
    for (T v : values) {
      auto bits = std::bit_cast<std::uint32_t>(v);
      bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) |
             ((bits >> 8) & 0xFF00u) | (bits >> 24);
      out.write(reinterpret_cast<const char*>(&bits), 4);
    }
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

template <typename T>
std::vector<T> read_le(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const auto size = std::filesystem::file_size(path);
  if (size % 4 != 0) throw std::runtime_error(path.string() + " is not a 32-bit blob");
  std::vector<T> values(size / 4);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(size));
  if (!in) throw std::runtime_error("failed reading " + path.string());
  if constexpr (std::endian::native != std::endian::little) {
    for (T& v : values) {
      auto bits = std::bit_cast<std::uint32_t>(v);
      bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) |
             ((bits >> 8) & 0xFF00u) | (bits >> 24);
      v = std::bit_cast<T>(bits);
    }
  }
  return values;
}

}  // namespace

void write_f32(const std::filesystem::path& path, std::span<const float> values) {
  write_le(path, values);
}
std::vector<float> read_f32(const std::filesystem::path& path) {
  return read_le<float>(path);
}
void write_u32(const std::filesystem::path& path,
               std::span<const std::uint32_t> values) {
  write_le(path, values);
}
std::vector<std::uint32_t> read_u32(const std::filesystem::path& path) {
  return read_le<std::uint32_t>(path);
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
}

MissingInput::MissingInput(const std::filesystem::path& path,
                           const std::string& producer)
    : std::runtime_error("missing input " + path.string() + " (produce it with `qdemu " +
                         producer + "`)") {}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace qdemu::io
