#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

#include "flowtracer/error.hpp"
#include "json.hpp"

namespace flowtracer::detail {

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Rejects keys outside `allowed`; `where` prefixes the error message.
void expect_keys(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed,
                 std::string_view where);

const nlohmann::json& require(const nlohmann::json& obj, std::string_view key,
                              std::string_view where);

template <typename T>
T get_as(const nlohmann::json& value, std::string_view where) {
  try {
    return value.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string(where) + ": " + e.what());
  }
}

}  // namespace flowtracer::detail
