#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tsnfabric {

/// Line-oriented `key = value` documents. `#` starts a comment, blank lines
/// are skipped, and a key may repeat (repeats are kept in file order).
struct KeyValueEntry {
  std::string key;
  std::string value;
  int line = 0;
};

class KeyValueDocument {
 public:
  static KeyValueDocument parse(std::string_view text);
  static KeyValueDocument load(const std::string& path);

  void add(std::string key, std::string value);

  const std::vector<KeyValueEntry>& entries() const { return entries_; }
  std::optional<std::string> first(std::string_view key) const;
  std::vector<std::string> all(std::string_view key) const;

  std::string to_text() const;

 private:
  std::vector<KeyValueEntry> entries_;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string_view trim(std::string_view s);
std::vector<std::string> split_list(std::string_view s, char sep = ',');

}  // namespace tsnfabric
