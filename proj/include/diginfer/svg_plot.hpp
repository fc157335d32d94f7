#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "diginfer/dbscan.hpp"
#include "diginfer/errors.hpp"
#include "diginfer/moments.hpp"
#include "diginfer/simulate.hpp"
#include "diginfer/telemetry.hpp"
#include "diginfer/util.hpp"

namespace diginfer {

// Minimal deterministic plan-view scatter plots. Everything is emitted with
// round-trip double formatting so regenerated files are byte-identical.
class SvgPlot {
 public:
  SvgPlot(double width = 640, double height = 640) : width_(width), height_(height) {}

  void add_point(double x, double y, const std::string& color, double radius = 2.0,
                 const std::string& group = "pts") {
    expand(x, y);
    points_.push_back({x, y, radius, color, group});
  }

  void add_segment(double x0, double y0, double x1, double y1, const std::string& color) {
    expand(x0, y0);
    expand(x1, y1);
    segments_.push_back({x0, y0, x1, y1, color});
  }

  void write(const std::string& path, const std::string& title) const {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    out << render(title);
  }

  std::string render(const std::string& title) const {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_double(width_)
        << "\" height=\"" << format_double(height_) << "\">\n";
    out << "<title>" << title << "</title>\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (const auto& s : segments_) {
      auto [x0, y0] = map(s.x0, s.y0);
      auto [x1, y1] = map(s.x1, s.y1);
      out << "<line x1=\"" << format_double(x0) << "\" y1=\"" << format_double(y0) << "\" x2=\""
          << format_double(x1) << "\" y2=\"" << format_double(y1) << "\" stroke=\"" << s.color
          << "\" stroke-width=\"1\"/>\n";
    }
    for (const auto& p : points_) {
      auto [cx, cy] = map(p.x, p.y);
      out << "<circle class=\"" << p.group << "\" cx=\"" << format_double(cx) << "\" cy=\""
          << format_double(cy) << "\" r=\"" << format_double(p.radius) << "\" fill=\"" << p.color
          << "\"/>\n";
    }
    out << "</svg>\n";
    return out.str();
  }

  static std::string palette_color(int index) {
    static const std::array<const char*, 10> colors = {
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
        "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    if (index < 0) return "#bbbbbb";
    return colors[static_cast<std::size_t>(index) % colors.size()];
  }

 private:
  struct Point {
    double x, y, radius;
    std::string color;
    std::string group;
  };
  struct Segment {
    double x0, y0, x1, y1;
    std::string color;
  };

  void expand(double x, double y) {
    min_x_ = std::min(min_x_, x);
    max_x_ = std::max(max_x_, x);
    min_y_ = std::min(min_y_, y);
    max_y_ = std::max(max_y_, y);
  }

  std::pair<double, double> map(double x, double y) const {
    const double margin = 20.0;
    double sx = max_x_ > min_x_ ? (width_ - 2 * margin) / (max_x_ - min_x_) : 1.0;
    double sy = max_y_ > min_y_ ? (height_ - 2 * margin) / (max_y_ - min_y_) : 1.0;
    double s = std::min(sx, sy);
    // y axis flipped: SVG grows downward, northing grows upward.
    return {margin + (x - min_x_) * s, height_ - margin - (y - min_y_) * s};
  }

  double width_, height_;
  double min_x_ = std::numeric_limits<double>::infinity();
  double max_x_ = -std::numeric_limits<double>::infinity();
  double min_y_ = std::numeric_limits<double>::infinity();
  double max_y_ = -std::numeric_limits<double>::infinity();
  std::vector<Point> points_;
  std::vector<Segment> segments_;
};

inline void plot_telemetry(const TelemetryLog& log, const std::string& path) {
  SvgPlot plot;
  for (const auto& r : log.records) {
    const char* color = r.role == Role::BucketDig ? "#d62728"
                        : r.role == Role::BucketDump ? "#1f77b4"
                                                     : "#2ca02c";
    plot.add_point(r.x, r.y, color, 2.0, role_name(r.role));
  }
  plot.write(path, "telemetry by role");
}

inline void plot_clusters(const PointSet& ps, const Clustering& c, const std::string& path) {
  SvgPlot plot;
  for (std::size_t i = 0; i < ps.size(); ++i)
    plot.add_point(ps.coords[i][0], ps.coords[i][1], SvgPlot::palette_color(c.labels[i]), 2.0,
                   c.labels[i] == kNoiseLabel ? "noise" : "cluster" + std::to_string(c.labels[i]));
  plot.write(path, "dig clusters");
}

inline void plot_moment_errors(const std::vector<ClusterMoments>& truth,
                               const std::vector<ClusterMoments>& predicted,
                               const std::string& path) {
  SvgPlot plot;
  for (const auto& t : truth) plot.add_point(t.mean_x, t.mean_y, "#2ca02c", 3.0, "truth");
  for (const auto& p : predicted) plot.add_point(p.mean_x, p.mean_y, "#d62728", 3.0, "predicted");
  for (const auto& p : predicted)
    for (const auto& t : truth)
      if (t.cluster_id == p.cluster_id)
        plot.add_segment(t.mean_x, t.mean_y, p.mean_x, p.mean_y, "#999999");
  plot.write(path, "truth vs predicted moments");
}

inline void plot_simulated_overlay(const std::vector<SimulatedCluster>& sims,
                                   const PointSet& true_digs, const Clustering& c,
                                   const std::string& path) {
  SvgPlot plot;
  for (std::size_t i = 0; i < true_digs.size(); ++i)
    plot.add_point(true_digs.coords[i][0], true_digs.coords[i][1],
                   SvgPlot::palette_color(c.labels[i]), 2.0, "truth");
  for (const auto& sc : sims)
    for (const auto& p : sc.points) plot.add_point(p[0], p[1], "black", 2.0, "simulated");
  plot.write(path, "simulated vs recorded digs");
}

}  // namespace diginfer
