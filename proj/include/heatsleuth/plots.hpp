#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace heatsleuth {

// A numeric CSV with a header row.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // -1 if absent
};

// Throws std::runtime_error on IO problems and ValidationError on malformed
// content (ragged rows, non-numeric cells).
CsvTable read_csv(const std::filesystem::path& path);

// Trace of one column against the iteration index.
std::string trace_svg(const std::vector<double>& iter, const std::vector<double>& values,
                      const std::string& title, double truth);

struct Polyline {
  std::vector<double> x, y;
};

// Unit disc with equal aspect, the true boundary, the reconstruction, and
// sensor positions (the last one highlighted).
std::string overlay_svg(const Polyline& truth, const Polyline& estimate,
                        const std::vector<double>& sensor_angles, const std::string& title);

// Renders every window of a run directory: trace_window_k_xi_j.svg per
// parameter and overlay_window_k.svg. All inputs are read and checked before
// the first file is written, so a bad input leaves no partial output.
std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& run_dir);

}  // namespace heatsleuth
