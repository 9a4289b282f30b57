#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lapseg/metrics/confusion.hpp"

namespace lapseg::metrics {

void to_json(nlohmann::json& j, const MetricsReport& r);
void from_json(const nlohmann::json& j, MetricsReport& r);

/// Column order of the comparison table.
inline constexpr std::array<std::string_view, 8> kTableColumns = {
    "method", "dice", "miou", "recall", "precision", "f2", "accuracy", "fps"};

struct TableRow {
  std::string method;
  MetricsReport report;
};

/// 17 significant digits, so every printed value round-trips to the double.
std::string format_value(double v);

void write_report_json(const MetricsReport& report, const std::filesystem::path& path);
MetricsReport read_report_json(const std::filesystem::path& path);

void write_table_csv(const std::vector<TableRow>& rows, std::ostream& out, bool header = true);
/// Appends rows; writes the header only when the file is new or empty.
void append_table_csv(const std::vector<TableRow>& rows, const std::filesystem::path& path);
std::vector<TableRow> read_table_csv(const std::filesystem::path& path);

/// Markdown table with the best value in each metric column in bold.
void write_table_markdown(const std::vector<TableRow>& rows, std::ostream& out, int digits = 4);

/// "dice=... miou=... fps=..." one-liner for terminals.
std::string summary_line(const MetricsReport& report);

}  // namespace lapseg::metrics
