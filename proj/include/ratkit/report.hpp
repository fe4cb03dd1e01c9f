#pragma once

#include "ratkit/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ratkit {

inline constexpr std::string_view kToolName = "ratkit";
inline constexpr std::string_view kToolVersion = "0.1.0";

using ojson = nlohmann::ordered_json;

/// Shortest round-trip decimal; "nan", "inf", "-inf" for non-finite values.
std::string format_real(double x);
std::string format_optional(const std::optional<double>& x);

/// Analysis settings that influence results (execution settings are left out).
ojson config_echo(const RunConfig& config);

/// Provenance block carried by every report.
ojson report_header(std::string_view command, const RunConfig& config,
                    const std::vector<std::pair<std::string, std::string>>& inputs);

/// JSON value for an optional real; null when absent or non-finite.
ojson json_real(const std::optional<double>& x);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  void add_row(std::vector<std::string> cells);
  std::size_t rows() const { return rows_.size(); }
  const std::vector<std::string>& columns() const { return columns_; }

  /// CSV text. A non-null header is written first as '#'-prefixed comment lines.
  std::string str(const ojson* header = nullptr) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

std::string csv_escape(std::string_view cell);

/// Parsed CSV: '#' comment lines skipped, first remaining line is the header.
struct CsvDocument {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;
};

CsvDocument parse_csv(std::string_view text);

/// Files produced by one command; written only once every analysis has succeeded.
class OutputBundle {
 public:
  void add(std::filesystem::path path, std::string contents);
  void merge(OutputBundle other);
  void write_all() const;

  const std::vector<std::pair<std::filesystem::path, std::string>>& files() const { return files_; }
  const std::string* find(const std::filesystem::path& path) const;

 private:
  std::vector<std::pair<std::filesystem::path, std::string>> files_;
};

/// Plot-ready CSV series for a report (by its "kind"), plus a plot_schema.json sidecar
/// describing every column. Throws ValidationError for report kinds without plot data.
OutputBundle export_plot_data(const ojson& report, const std::filesystem::path& dir);

}  // namespace ratkit
