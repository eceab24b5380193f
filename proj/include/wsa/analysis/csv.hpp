// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "wsa/analysis/analysis.hpp"
#include "wsa/losses/losses.hpp"

namespace wsa::analysis {

// Plain comma-separated table. Cells never contain commas or quotes here, so
// no quoting is done.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// printf("%.6g").
std::string format_number(double v);

std::string to_string(const CsvTable& table);
CsvTable parse_csv(const std::string& text);  // DimensionError on ragged rows

// Atomic write (temp file + rename); IoError naming the path on failure.
void write_csv(const CsvTable& table, const std::filesystem::path& path);
CsvTable read_csv(const std::filesystem::path& path);

// window,sdr_db,flops_reduction (the baseline row's window is "full").
CsvTable sweep_table(const std::vector<SweepRow>& rows);
// Header c0..c{n-1}, then one line per map row.
CsvTable map_table(const Tensor& map);
// window,in_band_mass,layer0,layer1,...
CsvTable locality_table(const std::vector<LocalityStats>& stats);
// step,recon,distill_mse,distill_cos,total
CsvTable loss_history_table(const std::vector<losses::LossBreakdown>& history);
// metric,value
CsvTable metric_table(const std::vector<std::pair<std::string, double>>& metrics);

}  // namespace wsa::analysis
