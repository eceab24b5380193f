// SPDX-License-Identifier: Apache-2.0

#include "wsa/analysis/csv.hpp"

#include <cstdio>
#include <sstream>

#include "wsa/core/error.hpp"
#include "wsa/core/io.hpp"

namespace wsa::analysis {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

namespace {

void append_line(std::string& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  out += '\n';
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

std::string to_string(const CsvTable& table) {
  std::string out;
  append_line(out, table.header);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw DimensionError("CSV row width does not match the header");
    append_line(out, row);
  }
  return out;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != table.header.size()) {
        throw DimensionError("CSV row " + std::to_string(table.rows.size() + 1) + " has " +
                             std::to_string(cells.size()) + " cells, header has " +
                             std::to_string(table.header.size()));
      }
      table.rows.push_back(std::move(cells));
    }
  }
  return table;
}

void write_csv(const CsvTable& table, const std::filesystem::path& path) { write_file_atomic(path, to_string(table)); }

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_file(path)); }

CsvTable sweep_table(const std::vector<SweepRow>& rows) {
  CsvTable t{{"window", "sdr_db", "flops_reduction"}, {}};
  for (const auto& r : rows) {
    t.rows.push_back({r.window ? std::to_string(*r.window) : "full", format_number(r.sdr_db),
                      format_number(r.flops_reduction)});
  }
  return t;
}

CsvTable map_table(const Tensor& map) {
  if (map.rank() != 2) throw DimensionError("map_table expects a matrix, got " + shape_string(map.shape()));
  const std::size_t rows = map.dim(0), cols = map.dim(1);
  CsvTable t;
  for (std::size_t j = 0; j < cols; ++j) t.header.push_back("c" + std::to_string(j));
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<std::string> row;
    row.reserve(cols);
    for (std::size_t j = 0; j < cols; ++j) row.push_back(format_number(map[i * cols + j]));
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable locality_table(const std::vector<LocalityStats>& stats) {
  CsvTable t{{"window", "in_band_mass"}, {}};
  const std::size_t layers = stats.empty() ? 0 : stats.front().per_layer.size();
  for (std::size_t l = 0; l < layers; ++l) t.header.push_back("layer" + std::to_string(l));
  for (const auto& s : stats) {
    if (s.per_layer.size() != layers) throw DimensionError("locality stats disagree on the layer count");
    std::vector<std::string> row{std::to_string(s.window), format_number(s.in_band_mass)};
    for (double m : s.per_layer) row.push_back(format_number(m));
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable loss_history_table(const std::vector<losses::LossBreakdown>& history) {
  CsvTable t{{"step", "recon", "distill_mse", "distill_cos", "total"}, {}};
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& h = history[i];
    t.rows.push_back({std::to_string(i), format_number(h.recon), format_number(h.distill_mse),
                      format_number(h.distill_cos), format_number(h.total)});
  }
  return t;
}

CsvTable metric_table(const std::vector<std::pair<std::string, double>>& metrics) {
  CsvTable t{{"metric", "value"}, {}};
  for (const auto& [name, value] : metrics) t.rows.push_back({name, format_number(value)});
  return t;
}

}  // namespace wsa::analysis
