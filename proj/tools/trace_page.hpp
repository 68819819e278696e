#pragma once

#include <filesystem>
#include <string>

#include "qtracker/traces/trace.hpp"

namespace qtracker::tools {

/// Self-contained page for one trace: outcome, results and every packet
/// dissected. `json_path` is linked relative to `page_path`.
std::string render_trace_page(const traces::Trace& t, const std::filesystem::path& json_path,
                              const std::filesystem::path& page_path);

}  // namespace qtracker::tools
