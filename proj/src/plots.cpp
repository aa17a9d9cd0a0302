#include "heatsleuth/plots.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "heatsleuth/errors.hpp"

namespace heatsleuth {

namespace {

std::string f3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string polyline(const std::vector<double>& x, const std::vector<double>& y, const std::string& style) {
  std::string pts;
  for (std::size_t i = 0; i < x.size(); ++i) pts += f3(x[i]) + "," + f3(y[i]) + " ";
  return "<polyline fill=\"none\" " + style + " points=\"" + pts + "\"/>\n";
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  CsvTable t;
  std::string line;
  if (!std::getline(in, line) || line.empty()) {
    throw ValidationError("'" + path.string() + "' has no header row");
  }
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.columns.push_back(cell);
  }
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') {
        throw ValidationError("'" + path.string() + "' line " + std::to_string(number) +
                              ": non-numeric cell '" + cell + "'");
      }
      row.push_back(v);
    }
    if (row.size() != t.columns.size()) {
      throw ValidationError("'" + path.string() + "' line " + std::to_string(number) +
                            ": expected " + std::to_string(t.columns.size()) + " cells");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string trace_svg(const std::vector<double>& iter, const std::vector<double>& values,
                      const std::string& title, double truth) {
  if (values.empty() || iter.size() != values.size()) {
    throw ValidationError("trace plot needs a non-empty series");
  }
  const double w = 640, h = 280, left = 60, right = 20, top = 30, bottom = 40;
  double lo = std::min(*std::min_element(values.begin(), values.end()), truth);
  double hi = std::max(*std::max_element(values.begin(), values.end()), truth);
  if (!std::isfinite(truth)) {
    lo = *std::min_element(values.begin(), values.end());
    hi = *std::max_element(values.begin(), values.end());
  }
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  lo -= pad, hi += pad;
  const double x0 = iter.front(), x1 = std::max(iter.back(), iter.front() + 1.0);
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (w - left - right); };
  auto py = [&](double y) { return top + (hi - y) / (hi - lo) * (h - top - bottom); };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + f3(w) + "\" height=\"" +
                  f3(h) + "\" viewBox=\"0 0 " + f3(w) + " " + f3(h) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + f3(w / 2) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" +
       escape(title) + "</text>\n";
  s += "<rect x=\"" + f3(left) + "\" y=\"" + f3(top) + "\" width=\"" + f3(w - left - right) +
       "\" height=\"" + f3(h - top - bottom) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double y = lo + (hi - lo) * k / 4.0;
    s += "<text x=\"" + f3(left - 6) + "\" y=\"" + f3(py(y) + 4) +
         "\" text-anchor=\"end\" font-size=\"11\">" + tick(y) + "</text>\n";
    const double x = x0 + (x1 - x0) * k / 4.0;
    s += "<text x=\"" + f3(px(x)) + "\" y=\"" + f3(h - bottom + 16) +
         "\" text-anchor=\"middle\" font-size=\"11\">" + tick(x) + "</text>\n";
  }
  // thin long chains so the file stays small
  const std::size_t stride = std::max<std::size_t>(1, values.size() / 4000);
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < values.size(); i += stride) {
    xs.push_back(px(iter[i]));
    ys.push_back(py(values[i]));
  }
  s += polyline(xs, ys, "stroke=\"steelblue\" stroke-width=\"0.8\"");
  if (std::isfinite(truth)) {
    s += "<line x1=\"" + f3(left) + "\" x2=\"" + f3(w - right) + "\" y1=\"" + f3(py(truth)) +
         "\" y2=\"" + f3(py(truth)) + "\" stroke=\"crimson\" stroke-dasharray=\"6,4\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

std::string overlay_svg(const Polyline& truth, const Polyline& estimate,
                        const std::vector<double>& sensor_angles, const std::string& title) {
  // one unit = 200 px in both directions
  const double scale = 200, cx = 240, cy = 250;
  auto px = [&](double x) { return cx + scale * x; };
  auto py = [&](double y) { return cy - scale * y; };
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"500\" "
                  "viewBox=\"0 0 480 500\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"240\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) +
       "</text>\n";
  s += "<circle cx=\"" + f3(cx) + "\" cy=\"" + f3(cy) + "\" r=\"" + f3(scale) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + f3(px(-1.1)) + "\" x2=\"" + f3(px(1.1)) + "\" y1=\"" + f3(cy) + "\" y2=\"" +
       f3(cy) + "\" stroke=\"#bbb\"/>\n";
  s += "<line x1=\"" + f3(cx) + "\" x2=\"" + f3(cx) + "\" y1=\"" + f3(py(-1.1)) + "\" y2=\"" +
       f3(py(1.1)) + "\" stroke=\"#bbb\"/>\n";
  auto curve = [&](const Polyline& p, const std::string& style) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < p.x.size(); ++i) {
      xs.push_back(px(p.x[i]));
      ys.push_back(py(p.y[i]));
    }
    return polyline(xs, ys, style);
  };
  s += curve(truth, "stroke=\"crimson\" stroke-width=\"2\" stroke-dasharray=\"6,4\"");
  s += curve(estimate, "stroke=\"royalblue\" stroke-width=\"2\"");
  for (std::size_t i = 0; i < sensor_angles.size(); ++i) {
    const bool last = i + 1 == sensor_angles.size();
    const double a = sensor_angles[i];
    s += "<circle cx=\"" + f3(px(std::cos(a))) + "\" cy=\"" + f3(py(std::sin(a))) + "\" r=\"" +
         (last ? "7" : "4") + "\" fill=\"" + (last ? "darkorange" : "gray") + "\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& run_dir) {
  namespace fs = std::filesystem;
  const nlohmann::json summary = [&] {
    try {
      return nlohmann::json::parse(read_text(run_dir / "summary.json"));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("summary.json: " + std::string(e.what()));
    }
  }();
  const std::vector<double> xi_true = summary.at("xi_true").get<std::vector<double>>();
  const CsvTable truth_boundary = read_csv(run_dir / "truth_boundary.csv");
  Polyline truth;
  for (const auto& row : truth_boundary.rows) {
    truth.x.push_back(row.at(0));
    truth.y.push_back(row.at(1));
  }

  std::vector<std::pair<fs::path, std::string>> pending;
  std::vector<double> sensors;
  for (const auto& w : summary.at("windows")) {
    const int k = w.at("k").get<int>();
    sensors.push_back(w.at("theta").get<double>());
    const CsvTable chain = read_csv(run_dir / w.at("chain_file").get<std::string>());
    if (chain.rows.empty()) {
      throw ValidationError("chain file of window " + std::to_string(k) + " is empty");
    }
    const int it_col = chain.column("iter");
    if (it_col < 0) throw ValidationError("chain file lacks an iter column");
    std::vector<double> iter;
    for (const auto& row : chain.rows) iter.push_back(row[it_col]);
    for (std::size_t j = 1; j <= xi_true.size(); ++j) {
      const int col = chain.column("xi_" + std::to_string(j));
      if (col < 0) throw ValidationError("chain file lacks column xi_" + std::to_string(j));
      std::vector<double> v;
      for (const auto& row : chain.rows) v.push_back(row[col]);
      const std::string title = "window " + std::to_string(k) + ": xi_" + std::to_string(j);
      pending.emplace_back(run_dir / ("trace_window_" + std::to_string(k) + "_xi_" +
                                      std::to_string(j) + ".svg"),
                           trace_svg(iter, v, title, xi_true[j - 1]));
    }
    const CsvTable recon = read_csv(run_dir / w.at("reconstruction_file").get<std::string>());
    if (recon.rows.empty()) throw ValidationError("empty reconstruction file");
    Polyline est;
    for (const auto& row : recon.rows) {
      est.x.push_back(row.at(0));
      est.y.push_back(row.at(1));
    }
    char title[96];
    std::snprintf(title, sizeof title, "window %d, sensor at %.4f rad", k, sensors.back());
    pending.emplace_back(run_dir / ("overlay_window_" + std::to_string(k) + ".svg"),
                         overlay_svg(truth, est, sensors, title));
  }
  if (pending.empty()) throw ValidationError("run has no windows to plot");

  std::vector<fs::path> written;
  for (const auto& [path, text] : pending) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
    os << text;
    written.push_back(path);
  }
  return written;
}

}  // namespace heatsleuth
