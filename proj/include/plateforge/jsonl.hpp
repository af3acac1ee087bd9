#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "plateforge/error.hpp"

namespace plateforge {

/// Calls fn on every nonblank line; errors are rethrown naming the line.
template <typename Fn>
void for_each_jsonl(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::ParseError, path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      fn(j);
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + " line " + std::to_string(line_no) + ": " + e.detail());
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  for (const auto& r : rows) out << r.dump() << '\n';
  if (!out) throw Error(Errc::IoError, "write failed " + path.string());
}

}  // namespace plateforge
