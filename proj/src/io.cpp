#include "lufilter/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace luf {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t CsvTable::require_column(std::string_view name, const std::string& path) const {
  if (auto c = column(name)) return *c;
  throw std::runtime_error(path + ": missing required column '" + std::string(name) + "'");
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open for reading");
  CsvTable t;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      t.header = split_csv_line(line);
      if (t.header.empty() || (t.header.size() == 1 && t.header[0].empty())) {
        throw std::runtime_error(path + ": empty header line");
      }
      continue;
    }
    if (trim(line).empty()) continue;  // tolerate blank lines
    auto fields = split_csv_line(line);
    if (fields.size() != t.header.size()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(t.header.size()) + " fields, got " +
                               std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(line_no);
  }
  if (line_no == 0) throw std::runtime_error(path + ": file is empty");
  return t;
}

double parse_double(const std::string& s, const std::string& what, long line) {
  const char* begin = s.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || errno == ERANGE) {
    throw std::runtime_error("line " + std::to_string(line) + ": cannot parse " + what +
                             " from '" + s + "'");
  }
  return v;
}

long parse_long(const std::string& s, const std::string& what, long line) {
  const char* begin = s.c_str();
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(begin, &end, 10);
  if (end == begin || *end != '\0' || errno == ERANGE) {
    throw std::runtime_error("line " + std::to_string(line) + ": cannot parse " + what +
                             " from '" + s + "'");
  }
  return v;
}

std::string format_double(double v) {
  char buf[40];
  // 17 significant digits guarantee an exact round trip for IEEE doubles
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

IniConfig IniConfig::parse_file(const std::string& path) {
  return parse_string(read_file(path), path);
}

IniConfig IniConfig::parse_string(const std::string& text, const std::string& origin) {
  IniConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    const std::string s = trim(line);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) {
        throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                 ": malformed section header '" + s + "'");
      }
      section = trim(std::string_view(s).substr(1, s.size() - 2));
      continue;
    }
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                               ": expected 'key = value', got '" + s + "'");
    }
    const std::string key = trim(std::string_view(s).substr(0, eq));
    const std::string value = trim(std::string_view(s).substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": empty key");
    }
    auto [it, inserted] = cfg.sections_[section].emplace(key, value);
    (void)it;
    if (!inserted) {
      throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": duplicate key '" +
                               key + "' in section [" + section + "]");
    }
  }
  return cfg;
}

bool IniConfig::has(const std::string& sec, const std::string& key) const {
  const auto s = sections_.find(sec);
  return s != sections_.end() && s->second.count(key) > 0;
}

std::string IniConfig::get(const std::string& sec, const std::string& key) const {
  const auto s = sections_.find(sec);
  if (s != sections_.end()) {
    const auto k = s->second.find(key);
    if (k != s->second.end()) return k->second;
  }
  throw std::runtime_error("config: missing required key '" + key + "' in section [" + sec + "]");
}

std::string IniConfig::get_or(const std::string& sec, const std::string& key,
                              const std::string& fallback) const {
  return has(sec, key) ? get(sec, key) : fallback;
}

double IniConfig::get_double(const std::string& sec, const std::string& key,
                             double fallback) const {
  if (!has(sec, key)) return fallback;
  return parse_double(get(sec, key), "[" + sec + "] " + key, 0);
}

long IniConfig::get_long(const std::string& sec, const std::string& key, long fallback) const {
  if (!has(sec, key)) return fallback;
  return parse_long(get(sec, key), "[" + sec + "] " + key, 0);
}

bool IniConfig::get_bool(const std::string& sec, const std::string& key, bool fallback) const {
  if (!has(sec, key)) return fallback;
  const std::string v = get(sec, key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::runtime_error("config: cannot parse boolean '" + v + "' for [" + sec + "] " + key);
}

std::vector<double> IniConfig::get_vector(const std::string& sec, const std::string& key) const {
  std::string v = get(sec, key);
  for (auto& c : v) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(v);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) out.push_back(parse_double(tok, "[" + sec + "] " + key, 0));
  if (out.empty()) {
    throw std::runtime_error("config: empty vector for [" + sec + "] " + key);
  }
  return out;
}

void IniConfig::set(const std::string& sec, const std::string& key, const std::string& value) {
  sections_[sec][key] = value;
}

std::string IniConfig::canonical() const {
  std::string out;
  for (const auto& [sec, kv] : sections_) {
    out += "[" + sec + "]\n";
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace luf
