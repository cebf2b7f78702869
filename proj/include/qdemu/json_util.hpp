#pragma once

#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>

#include "json.hpp"

namespace qdemu {

// Rejects keys outside `allowed` so misspellings never fall back to defaults.
inline void require_known_keys(const nlohmann::json& j,
                               std::initializer_list<std::string_view> allowed,
                               std::string_view context) {
  if (!j.is_object()) {
    throw std::invalid_argument(std::string(context) + ": expected an object");
  }
  for (const auto& [key, value] : j.items()) {
    bool found = false;
    for (auto a : allowed) found = found || key == a;
    if (!found) {
      throw std::invalid_argument("unknown key '" + key + "' in " +
                                  std::string(context));
    }
  }
}

template <typename T>
void read_optional(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->template get<T>();
}

}  // namespace qdemu
