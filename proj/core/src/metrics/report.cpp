#include "lapseg/metrics/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lapseg/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lapseg::metrics {

void to_json(json& j, const MetricsReport& r) {
  j = {{"dice", r.dice},       {"miou", r.miou}, {"recall", r.recall},
       {"precision", r.precision}, {"f2", r.f2},     {"accuracy", r.accuracy},
       {"fps", r.fps ? json(*r.fps) : json(nullptr)}, {"n_frames", r.n_frames}};
}

void from_json(const json& j, MetricsReport& r) {
  r.dice = j.at("dice").get<double>();
  r.miou = j.at("miou").get<double>();
  r.recall = j.at("recall").get<double>();
  r.precision = j.at("precision").get<double>();
  r.f2 = j.at("f2").get<double>();
  r.accuracy = j.at("accuracy").get<double>();
  r.fps = j.at("fps").is_null() ? std::nullopt : std::optional<double>(j.at("fps").get<double>());
  r.n_frames = j.at("n_frames").get<std::int64_t>();
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_report_json(const MetricsReport& report, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << json(report).dump(2) << '\n';
}

MetricsReport read_report_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot read " + path.string());
  return json::parse(in).get<MetricsReport>();
}

namespace {

std::array<std::optional<double>, 7> values(const MetricsReport& r) {
  return {r.dice, r.miou, r.recall, r.precision, r.f2, r.accuracy, r.fps};
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_header(std::ostream& out) {
  for (std::size_t i = 0; i < kTableColumns.size(); ++i) out << (i ? "," : "") << kTableColumns[i];
  out << '\n';
}

}  // namespace

void write_table_csv(const std::vector<TableRow>& rows, std::ostream& out, bool header) {
  if (header) write_header(out);
  for (const auto& row : rows) {
    out << csv_escape(row.method);
    for (const auto& v : values(row.report)) out << ',' << (v ? format_value(*v) : "");
    out << '\n';
  }
}

void append_table_csv(const std::vector<TableRow>& rows, const fs::path& path) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  write_table_csv(rows, out, fresh);
}

std::vector<TableRow> read_table_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<TableRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    // Method names with commas are quoted; numbers never are.
    std::string method;
    std::size_t pos = 0;
    if (line[0] == '"') {
      for (pos = 1; pos < line.size(); ++pos) {
        if (line[pos] == '"') {
          if (pos + 1 < line.size() && line[pos + 1] == '"') {
            method += '"';
            ++pos;
          } else {
            ++pos;
            break;
          }
        } else {
          method += line[pos];
        }
      }
    } else {
      pos = line.find(',');
      method = line.substr(0, pos);
    }
    std::vector<std::string> cells;
    std::stringstream rest(pos < line.size() ? line.substr(pos + 1) : "");
    std::string cell;
    while (std::getline(rest, cell, ',')) cells.push_back(cell);
    if (cells.size() == 6) cells.emplace_back();
    if (cells.size() != 7) throw Error(ErrorCode::io_error, "malformed table row in " + path.string());
    TableRow row{method, {}};
    double* fields[] = {&row.report.dice, &row.report.miou, &row.report.recall,
                        &row.report.precision, &row.report.f2, &row.report.accuracy};
    for (int i = 0; i < 6; ++i) *fields[i] = std::stod(cells[i]);
    if (!cells[6].empty()) row.report.fps = std::stod(cells[6]);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_table_markdown(const std::vector<TableRow>& rows, std::ostream& out, int digits) {
  std::array<std::optional<double>, 7> best{};
  for (const auto& row : rows) {
    const auto v = values(row.report);
    for (std::size_t i = 0; i < v.size(); ++i)
      if (v[i] && (!best[i] || *v[i] > *best[i])) best[i] = v[i];
  }
  out << '|';
  for (auto col : kTableColumns) out << ' ' << col << " |";
  out << "\n|";
  for (std::size_t i = 0; i < kTableColumns.size(); ++i) out << (i ? "---:|" : "---|");
  out << '\n';
  char buf[64];
  for (const auto& row : rows) {
    out << "| " << row.method << " |";
    const auto v = values(row.report);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i]) {
        out << " - |";
        continue;
      }
      std::snprintf(buf, sizeof buf, "%.*f", i == 6 ? 2 : digits, *v[i]);
      if (best[i] && *v[i] == *best[i])
        out << " **" << buf << "** |";
      else
        out << ' ' << buf << " |";
    }
    out << '\n';
  }
}

std::string summary_line(const MetricsReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "dice=%.6f miou=%.6f recall=%.6f precision=%.6f f2=%.6f accuracy=%.6f",
                r.dice, r.miou, r.recall, r.precision, r.f2, r.accuracy);
  std::string s = buf;
  if (r.fps) {
    std::snprintf(buf, sizeof buf, " fps=%.2f", *r.fps);
    s += buf;
  }
  return s + " n_frames=" + std::to_string(r.n_frames);
}

}  // namespace lapseg::metrics
