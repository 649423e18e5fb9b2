#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mixreg/error.hpp"

namespace mixreg::cli {

/// Bad user input: unreadable file, malformed CSV, unknown column, bad flag
/// combination. Maps to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Numeric CSV: mandatory header row, comma separated, '.' decimals.
struct CsvTable {
  std::vector<std::string> columns;
  /// rows x columns.
  Eigen::MatrixXd values;
  /// Lowercase hex SHA-256 of the raw file bytes.
  std::string sha256;

  /// Throws InputError naming the line and column of the first bad cell.
  static CsvTable parse(const std::string& text);
  static CsvTable read(const std::filesystem::path& path);

  std::size_t rows() const noexcept { return static_cast<std::size_t>(values.rows()); }
  /// Throws InputError for unknown names.
  Eigen::Index column(const std::string& name) const;
};

std::string sha256_hex(const std::string& bytes);

}  // namespace mixreg::cli
