#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qtracker/traces/corpus.hpp"

namespace qtracker::traces {

struct GridCell {
  std::optional<int> error_code;  // empty when the pair was not run
  std::filesystem::path trace_path;
};

struct Grid {
  std::string date;
  std::vector<std::string> scenarios;  // columns
  std::vector<std::string> endpoints;  // rows
  std::vector<std::vector<GridCell>> cells;  // [endpoint][scenario]
};

/// Endpoint x scenario matrix for one date. Columns follow `scenario_order`,
/// then any other scenario seen that day in name order.
Grid build_grid(const RunCorpus& corpus, const std::string& date,
                const std::vector<std::string>& scenario_order = {});

/// Self-contained page; cell links are made relative to `html_dir`.
std::string render_grid_html(const Grid& grid, const std::filesystem::path& html_dir = {});
std::string render_grid_csv(const Grid& grid);

}  // namespace qtracker::traces
