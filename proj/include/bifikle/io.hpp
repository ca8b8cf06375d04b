#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace bifikle {

// %.17g formatting: round-trip exact and idempotent, so re-ingesting an
// emitted file reproduces it byte for byte.
std::string format_double(double v);
double parse_double(const std::string& s, const std::string& context);

std::vector<std::string> split_csv_line(const std::string& line);

// Matrix CSV: optional '#'-prefixed key-value header lines, one header row
// of column names, then rows of doubles.
void write_matrix_csv(const std::filesystem::path& path,
                      const Eigen::MatrixXd& m,
                      const std::vector<std::string>& columns,
                      const std::vector<std::pair<std::string, std::string>>& meta = {});

struct CsvMatrix {
  std::vector<std::string> columns;
  Eigen::MatrixXd values;
  std::map<std::string, std::string> meta;
};
CsvMatrix read_matrix_csv(const std::filesystem::path& path);

// Flat `key = value` files (configs, metadata). Preserves insertion order.
class KeyValueFile {
 public:
  KeyValueFile() = default;
  static KeyValueFile parse_file(const std::filesystem::path& path);
  static KeyValueFile parse_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get(const std::string& key) const;  // throws ConfigError naming the key
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  long get_int(const std::string& key) const;
  long get_int_or(const std::string& key, long fallback) const;
  bool get_bool_or(const std::string& key, bool fallback) const;

  void set(const std::string& key, const std::string& value);
  void set_double(const std::string& key, double value);
  void set_int(const std::string& key, long value);

  std::string serialize() const;
  void write_file(const std::filesystem::path& path) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::size_t> index_;
};

std::uint64_t fnv1a64(const std::string& bytes);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string hash_hex(std::uint64_t h);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace bifikle
