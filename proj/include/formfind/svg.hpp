#pragma once

// Minimal self-contained SVG output: line charts for loss/convergence curves
// and displacement-colored grid plots. No timestamps, fixed number
// formatting, so identical inputs give identical bytes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "formfind/frame.hpp"

namespace formfind::svg {

inline std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", x);
    return buf;
}

struct Series {
    std::string label;
    std::string color;
    std::vector<double> x, y;
};

// Single-panel line chart with linear axes and a small legend.
inline std::string line_chart(const std::string& title, const std::vector<Series>& series,
                              int width = 640, int height = 420) {
    const double ml = 60, mr = 20, mt = 40, mb = 45;
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, s.x[i]); xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]); ymax = std::max(ymax, s.y[i]);
        }
    if (!(xmax > xmin)) { xmax = xmin + 1; }
    if (!(ymax > ymin)) { ymax = ymin + 1; ymin -= 1; }
    const double pw = width - ml - mr, ph = height - mt - mb;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    os << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
       << title << "</text>\n";
    os << "<rect x=\"" << num(ml) << "\" y=\"" << num(mt) << "\" width=\"" << num(pw)
       << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double xv = xmin + (xmax - xmin) * t / 4.0;
        const double yv = ymin + (ymax - ymin) * t / 4.0;
        os << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(height - mb + 18)
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << num(xv)
           << "</text>\n";
        os << "<text x=\"" << num(ml - 6) << "\" y=\"" << num(py(yv) + 4)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(yv)
           << "</text>\n";
    }
    for (const auto& s : series) {
        os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            os << num(px(s.x[i])) << ',' << num(py(s.y[i])) << ' ';
        os << "\"/>\n";
    }
    double ly = mt + 14;
    for (const auto& s : series) {
        os << "<line x1=\"" << num(ml + pw - 130) << "\" y1=\"" << num(ly - 4) << "\" x2=\""
           << num(ml + pw - 110) << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << s.color
           << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << num(ml + pw - 105) << "\" y=\"" << num(ly)
           << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.label << "</text>\n";
        ly += 16;
    }
    os << "</svg>\n";
    return os.str();
}

// 2x2 grid of panels, one per objective/channel.
inline std::string panel_chart(const std::string& title,
                               const std::vector<std::pair<std::string, std::vector<Series>>>& panels,
                               int panel_w = 420, int panel_h = 300) {
    const int cols = 2;
    const int rows = (static_cast<int>(panels.size()) + cols - 1) / cols;
    const int width = panel_w * cols, height = panel_h * rows + 30;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    os << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
       << title << "</text>\n";
    for (std::size_t i = 0; i < panels.size(); ++i) {
        const int r = static_cast<int>(i) / cols, c = static_cast<int>(i) % cols;
        std::string inner = line_chart(panels[i].first, panels[i].second, panel_w, panel_h);
        // strip the inner document tags and embed as a translated group
        const auto open_end = inner.find(">\n");
        const auto close = inner.rfind("</svg>");
        os << "<g transform=\"translate(" << c * panel_w << "," << r * panel_h + 30 << ")\">\n"
           << inner.substr(open_end + 2, close - open_end - 2) << "</g>\n";
    }
    os << "</svg>\n";
    return os.str();
}

// Plan-view grid plot; edges colored blue (no displacement) to red (max
// vertical displacement), using the mean |z-displacement| of edge endpoints.
inline std::string displacement_figure(const std::string& title, const frame::GridModel& model,
                                       const Eigen::VectorXd& displacements, int width = 640,
                                       int height = 480) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300, dmax = 0.0;
    std::vector<double> dz(model.nodes.size());
    for (std::size_t n = 0; n < model.nodes.size(); ++n) {
        xmin = std::min(xmin, model.nodes[n].x()); xmax = std::max(xmax, model.nodes[n].x());
        ymin = std::min(ymin, model.nodes[n].y()); ymax = std::max(ymax, model.nodes[n].y());
        dz[n] = std::abs(displacements(6 * n + 2));
        dmax = std::max(dmax, dz[n]);
    }
    if (!(xmax > xmin)) xmax = xmin + 1;
    if (!(ymax > ymin)) ymax = ymin + 1;
    const double m = 50;
    const double sx = (width - 2 * m) / (xmax - xmin), sy = (height - 2 * m - 30) / (ymax - ymin);
    const double s = std::min(sx, sy);
    auto px = [&](double x) { return m + (x - xmin) * s; };
    auto py = [&](double y) { return height - m - (y - ymin) * s; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    os << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
       << title << " (max |dz| = " << num(dmax) << ")</text>\n";
    for (const auto& e : model.elements) {
        const double t = dmax > 0 ? 0.5 * (dz[e.node_i] + dz[e.node_j]) / dmax : 0.0;
        const int r = static_cast<int>(255 * t);
        const int b = static_cast<int>(255 * (1.0 - t));
        os << "<line x1=\"" << num(px(model.nodes[e.node_i].x())) << "\" y1=\""
           << num(py(model.nodes[e.node_i].y())) << "\" x2=\""
           << num(px(model.nodes[e.node_j].x())) << "\" y2=\""
           << num(py(model.nodes[e.node_j].y())) << "\" stroke=\"rgb(" << r << ",0," << b
           << ")\" stroke-width=\"2\"/>\n";
    }
    for (std::size_t n = 0; n < model.nodes.size(); ++n)
        if (!model.supports.empty() && !model.supports[n].empty())
            os << "<circle cx=\"" << num(px(model.nodes[n].x())) << "\" cy=\""
               << num(py(model.nodes[n].y())) << "\" r=\"3\" fill=\"black\"/>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace formfind::svg
