#include "json_util.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace flowtracer::detail {

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open " + path.string());
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << text;
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

void expect_keys(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed,
                 std::string_view where) {
  if (!obj.is_object()) {
    throw ParseError(std::string(where) + ": expected an object");
  }
  for (const auto& item : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw ParseError(std::string(where) + ": unknown key '" + item.key() + "'");
    }
  }
}

const nlohmann::json& require(const nlohmann::json& obj, std::string_view key,
                              std::string_view where) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ParseError(std::string(where) + ": missing key '" + std::string(key) + "'");
  }
  return *it;
}

}  // namespace flowtracer::detail
