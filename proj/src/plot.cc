// Copyright 2026 The bbl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "bbl/harness.h"

namespace bbl::harness {
namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 560.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 380.0;

constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                   "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string F(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string Tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

const char* Color(std::size_t i) { return kColors[i % (sizeof(kColors) / sizeof(kColors[0]))]; }

class Canvas {
 public:
  Canvas(double x_lo, double x_hi) : x_lo_(x_lo), x_hi_(x_hi) {
    if (!(x_hi_ > x_lo_)) {
      const double pad = std::max(0.05, std::abs(x_lo_) * 0.1);
      x_lo_ -= pad;
      x_hi_ += pad;
    }
  }

  double X(double v) const { return kLeft + (v - x_lo_) / (x_hi_ - x_lo_) * (kRight - kLeft); }
  static double Y(double v) { return kBottom - std::clamp(v, 0.0, 1.0) * (kBottom - kTop); }

  void Open(const std::string& description) {
    out_ += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out_ += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + F(kWidth) +
            "\" height=\"" + F(kHeight) + "\" viewBox=\"0 0 " + F(kWidth) + " " + F(kHeight) +
            "\">\n";
    out_ += "<desc>" + Escape(description) + "</desc>\n";
    out_ += "<rect x=\"0\" y=\"0\" width=\"" + F(kWidth) + "\" height=\"" + F(kHeight) +
            "\" fill=\"white\"/>\n";
  }

  void Axes(const std::vector<double>& x_ticks, const std::string& x_label,
            const std::string& y_label) {
    out_ += "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n";
    out_ += "<line x1=\"" + F(kLeft) + "\" y1=\"" + F(kBottom) + "\" x2=\"" + F(kRight) +
            "\" y2=\"" + F(kBottom) + "\"/>\n";
    out_ += "<line x1=\"" + F(kLeft) + "\" y1=\"" + F(kTop) + "\" x2=\"" + F(kLeft) +
            "\" y2=\"" + F(kBottom) + "\"/>\n";
    out_ += "</g>\n<g class=\"ticks\" font-family=\"sans-serif\" font-size=\"11\">\n";
    for (int i = 0; i <= 4; ++i) {
      const double v = 0.25 * i;
      out_ += "<line x1=\"" + F(kLeft - 4) + "\" y1=\"" + F(Y(v)) + "\" x2=\"" + F(kLeft) +
              "\" y2=\"" + F(Y(v)) + "\" stroke=\"black\"/>\n";
      out_ += "<text x=\"" + F(kLeft - 8) + "\" y=\"" + F(Y(v) + 4) +
              "\" text-anchor=\"end\">" + Tick(v) + "</text>\n";
    }
    for (double t : x_ticks) {
      out_ += "<line x1=\"" + F(X(t)) + "\" y1=\"" + F(kBottom) + "\" x2=\"" + F(X(t)) +
              "\" y2=\"" + F(kBottom + 4) + "\" stroke=\"black\"/>\n";
      out_ += "<text x=\"" + F(X(t)) + "\" y=\"" + F(kBottom + 18) +
              "\" text-anchor=\"middle\">" + Tick(t) + "</text>\n";
    }
    out_ += "</g>\n";
    out_ += "<text x=\"" + F((kLeft + kRight) / 2) + "\" y=\"" + F(kBottom + 42) +
            "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
            Escape(x_label) + "</text>\n";
    out_ += "<text x=\"18\" y=\"" + F((kTop + kBottom) / 2) +
            "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
            "transform=\"rotate(-90 18 " +
            F((kTop + kBottom) / 2) + ")\">" + Escape(y_label) + "</text>\n";
  }

  void Band(const std::vector<double>& x, const std::vector<double>& lo,
            const std::vector<double>& hi, const char* color) {
    std::string pts;
    for (std::size_t i = 0; i < x.size(); ++i) pts += F(X(x[i])) + "," + F(Y(hi[i])) + " ";
    for (std::size_t i = x.size(); i-- > 0;) pts += F(X(x[i])) + "," + F(Y(lo[i])) + " ";
    pts.pop_back();
    out_ += "<polygon class=\"band\" points=\"" + pts + "\" fill=\"" + color +
            "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
  }

  void Line(const std::vector<double>& x, const std::vector<double>& y, const char* color,
            const std::string& name) {
    std::string pts;
    for (std::size_t i = 0; i < x.size(); ++i) pts += F(X(x[i])) + "," + F(Y(y[i])) + " ";
    if (!pts.empty()) pts.pop_back();
    out_ += "<polyline class=\"mean\" data-method=\"" + Escape(name) + "\" points=\"" + pts +
            "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    for (std::size_t i = 0; i < x.size(); ++i) {
      out_ += "<circle cx=\"" + F(X(x[i])) + "\" cy=\"" + F(Y(y[i])) + "\" r=\"3\" fill=\"" +
              color + "\"/>\n";
    }
  }

  void Triangle(double level, const char* color, const std::string& name) {
    const double x = X(level);
    out_ += "<polygon class=\"breaking-point\" data-method=\"" + Escape(name) + "\" points=\"" +
            F(x - 6) + "," + F(kBottom) + " " + F(x + 6) + "," + F(kBottom) + " " + F(x) + "," +
            F(kBottom - 10) + "\" fill=\"" + color + "\" stroke=\"black\" stroke-width=\"0.5\"/>\n";
  }

  void HorizontalRule(double v, const std::string& label) {
    out_ += "<line class=\"alpha\" x1=\"" + F(kLeft) + "\" y1=\"" + F(Y(v)) + "\" x2=\"" +
            F(kRight) + "\" y2=\"" + F(Y(v)) +
            "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    out_ += "<text x=\"" + F(kRight - 4) + "\" y=\"" + F(Y(v) - 4) +
            "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" "
            "fill=\"gray\">" +
            Escape(label) + "</text>\n";
  }

  void Legend(const std::vector<std::string>& names) {
    out_ += "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
    for (std::size_t i = 0; i < names.size(); ++i) {
      const double y = kTop + 10 + 20.0 * static_cast<double>(i);
      out_ += "<line x1=\"" + F(kRight + 20) + "\" y1=\"" + F(y) + "\" x2=\"" + F(kRight + 44) +
              "\" y2=\"" + F(y) + "\" stroke=\"" + Color(i) + "\" stroke-width=\"2\"/>\n";
      out_ += "<text x=\"" + F(kRight + 50) + "\" y=\"" + F(y + 4) + "\">" + Escape(names[i]) +
              "</text>\n";
    }
    out_ += "</g>\n";
  }

  std::string Close() {
    out_ += "</svg>\n";
    return std::move(out_);
  }

 private:
  double x_lo_;
  double x_hi_;
  std::string out_;
};

std::string AxisLabel(const std::string& level_name) {
  return level_name == "color_variance" ? "color variance" : "H(Y|A) [nats]";
}

}  // namespace

std::string PlotSvg(const SweepResult& result,
                    const std::vector<stats::BreakingPointReport>& reports) {
  const auto& cfg = result.config;
  const auto kind = NativeBiasKind(cfg.task);
  std::vector<double> levels;
  for (const auto& g : cfg.grid) levels.push_back(LevelValue(g));
  Canvas canvas(*std::min_element(levels.begin(), levels.end()),
                *std::max_element(levels.begin(), levels.end()));
  canvas.Open(cfg.ToJson().dump());
  canvas.Axes(levels, AxisLabel(LevelName(kind)), "unbiased accuracy");
  std::vector<std::string> names;
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    const std::string name = debias::ToString(cfg.methods[mi]);
    names.push_back(name);
    std::vector<double> x, mean, lo, hi;
    for (int l = 0; l < static_cast<int>(levels.size()); ++l) {
      const auto& c = result.cell(mi, l);
      if (c.completed == 0) continue;
      x.push_back(levels[l]);
      mean.push_back(c.mean_unbiased);
      lo.push_back(c.mean_unbiased - c.std_unbiased);
      hi.push_back(c.mean_unbiased + c.std_unbiased);
    }
    if (x.size() >= 2) canvas.Band(x, lo, hi, Color(mi));
    canvas.Line(x, mean, Color(mi), name);
  }
  for (const auto& rep : reports) {
    if (!rep.breaking_point) continue;
    const auto it = std::find(names.begin(), names.end(), rep.method);
    const std::size_t idx = it == names.end() ? 0 : static_cast<std::size_t>(it - names.begin());
    canvas.Triangle(*rep.breaking_point, Color(idx), rep.method);
  }
  canvas.Legend(names);
  return canvas.Close();
}

std::string PValueSvg(const std::vector<stats::BreakingPointReport>& reports) {
  std::vector<double> levels;
  for (const auto& r : reports) levels.insert(levels.end(), r.grid.begin(), r.grid.end());
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  if (levels.empty()) levels.push_back(0.0);
  Canvas canvas(levels.front(), levels.back());
  nlohmann::json desc = nlohmann::json::array();
  for (const auto& r : reports) desc.push_back(r.ToJson());
  canvas.Open(desc.dump());
  const std::string level_name = reports.empty() ? "hya_nats" : reports.front().level_name;
  // Keep tick labels legible on dense grids.
  std::vector<double> ticks;
  const std::size_t stride = std::max<std::size_t>(1, levels.size() / 10);
  for (std::size_t i = 0; i < levels.size(); i += stride) ticks.push_back(levels[i]);
  canvas.Axes(ticks, AxisLabel(level_name), "one-sided KS p-value");
  const double alpha = reports.empty() ? stats::kDefaultAlpha : reports.front().alpha;
  canvas.HorizontalRule(alpha, "alpha");
  std::vector<std::string> names;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    names.push_back(reports[i].method);
    canvas.Line(reports[i].grid, reports[i].p_values, Color(i), reports[i].method);
  }
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (reports[i].breaking_point) {
      canvas.Triangle(*reports[i].breaking_point, Color(i), reports[i].method);
    }
  }
  canvas.Legend(names);
  return canvas.Close();
}

void emit_plot(const SweepResult& result,
               const std::vector<stats::BreakingPointReport>& reports,
               const std::filesystem::path& path) {
  WriteTextFile(path, PlotSvg(result, reports));
}

void emit_plot(const std::vector<stats::BreakingPointReport>& reports,
               const std::filesystem::path& path) {
  WriteTextFile(path, PValueSvg(reports));
}

}  // namespace bbl::harness
