#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace detox {

using json = nlohmann::json;

// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Half-open byte interval [begin, end) into a UTF-8 string.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool overlaps(const Span& other) const {
    return !empty() && !other.empty() && begin < other.end && other.begin < end;
  }
  bool within(std::size_t length) const {
    return begin <= end && end <= length;
  }
  std::string_view slice(std::string_view text) const {
    return text.substr(begin, end - begin);
  }

  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

void to_json(json& j, const Span& span);
void from_json(const json& j, Span& span);

// Calls `fn(line_number, line)` for each non-blank line; line numbers are
// 1-based. Throws Error if the file cannot be opened.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::size_t, const std::string&)>& fn);

// Parses one JSON object per non-blank line.
std::vector<json> read_jsonl(const std::filesystem::path& path);

// Writes one compact JSON object per line, replacing the file.
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// Stable 64-bit hash (FNV-1a followed by a splitmix finalizer), identical
// across platforms and runs.
std::uint64_t stable_hash(std::string_view bytes, std::uint64_t seed = 0);

std::vector<std::string> split_string(std::string_view text, char delimiter);
std::string_view trim(std::string_view text);

// Invalid UTF-8 sequences become U+FFFD.
std::string to_valid_utf8(std::string_view text);

}  // namespace detox
