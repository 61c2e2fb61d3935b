#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace luf {

// ---- CSV -------------------------------------------------------------------

// Strict comma-separated table: a header line plus data rows, every row with
// exactly the header's column count. No quoting or escaping (no schema here
// needs them); fields are taken verbatim after trimming surrounding spaces.
// Errors carry 1-based line numbers.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<long> line_numbers;  // source line of each data row

  // Column index by header name; nullopt when absent.
  std::optional<std::size_t> column(std::string_view name) const;
  // Same, but throws a descriptive error when the column is required.
  std::size_t require_column(std::string_view name, const std::string& path) const;
};

CsvTable read_csv(const std::string& path);

// Field parsers with file/line context in their error messages.
double parse_double(const std::string& s, const std::string& what, long line);
long parse_long(const std::string& s, const std::string& what, long line);

// 17-significant-digit decimal formatting for doubles: reading the printed
// value back yields the identical bit pattern.
std::string format_double(double v);

// ---- config files ------------------------------------------------------------

// `[section]` headers with `key = value` entries; '#' and ';' start comments;
// blank lines ignored. Keys are unique within a section (later duplicates are
// an error, not a silent override).
class IniConfig {
 public:
  IniConfig() = default;
  static IniConfig parse_file(const std::string& path);
  static IniConfig parse_string(const std::string& text,
                                const std::string& origin = "<string>");

  bool has(const std::string& sec, const std::string& key) const;
  std::string get(const std::string& sec, const std::string& key) const;
  std::string get_or(const std::string& sec, const std::string& key,
                     const std::string& fallback) const;
  double get_double(const std::string& sec, const std::string& key, double fallback) const;
  long get_long(const std::string& sec, const std::string& key, long fallback) const;
  bool get_bool(const std::string& sec, const std::string& key, bool fallback) const;
  // Comma- or space-separated list of reals.
  std::vector<double> get_vector(const std::string& sec, const std::string& key) const;

  void set(const std::string& sec, const std::string& key, const std::string& value);

  const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return sections_;
  }

  // Sorted, normalized serialization — the input to the config hash, so two
  // configs hash equal iff they are semantically equal.
  std::string canonical() const;

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

// FNV-1a 64-bit hash; used for config fingerprints in run manifests.
std::uint64_t fnv1a64(std::string_view s);

// Whole-file slurp (binary-safe); throws on failure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace luf
