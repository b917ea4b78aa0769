#pragma once

#include "tgx/common.hpp"
#include "tgx/io.hpp"

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

namespace tgx::svg {

struct Series {
    std::string label;
    std::string color;
    std::vector<double> x, y;
    bool scatter = false;
};

// Minimal static chart writer. Line charts for curves, scatter for embeddings.
inline void write_chart(const std::filesystem::path& path, const std::string& title,
                        const std::string& x_label, const std::string& y_label,
                        const std::vector<Series>& series) {
    require(!series.empty(), "plot: no series");
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series) {
        require(s.x.size() == s.y.size() && !s.x.empty(), "plot: empty or ragged series " + s.label);
        for (double v : s.x) {
            xmin = std::min(xmin, v);
            xmax = std::max(xmax, v);
        }
        for (double v : s.y) {
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }
    }
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) {
        ymax = ymin + 0.5;
        ymin -= 0.5;
    }
    double pad_x = 0.02 * (xmax - xmin), pad_y = 0.05 * (ymax - ymin);
    xmin -= pad_x;
    xmax += pad_x;
    ymin -= pad_y;
    ymax += pad_y;

    const double W = 720, H = 480, ml = 70, mr = 20, mt = 40, mb = 55;
    auto sx = [&](double v) { return ml + (v - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto sy = [&](double v) { return H - mb - (v - ymin) / (ymax - ymin) * (H - mt - mb); };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(static_cast<int>(W)) +
           "\" height=\"" + std::to_string(static_cast<int>(H)) + "\" viewBox=\"0 0 720 480\">\n";
    out += "<rect width=\"720\" height=\"480\" fill=\"white\"/>\n";
    out += "<text x=\"360\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
           title + "</text>\n";

    // axes
    out += "<line x1=\"" + io::format_double(ml) + "\" y1=\"" + io::format_double(H - mb) + "\" x2=\"" +
           io::format_double(W - mr) + "\" y2=\"" + io::format_double(H - mb) +
           "\" stroke=\"black\"/>\n";
    out += "<line x1=\"" + io::format_double(ml) + "\" y1=\"" + io::format_double(mt) + "\" x2=\"" +
           io::format_double(ml) + "\" y2=\"" + io::format_double(H - mb) + "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 5; ++k) {
        double xv = xmin + (xmax - xmin) * k / 5.0;
        double yv = ymin + (ymax - ymin) * k / 5.0;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3g", xv);
        out += "<text x=\"" + io::format_double(sx(xv)) + "\" y=\"" + io::format_double(H - mb + 18) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + buf + "</text>\n";
        std::snprintf(buf, sizeof(buf), "%.3g", yv);
        out += "<text x=\"" + io::format_double(ml - 8) + "\" y=\"" + io::format_double(sy(yv) + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + buf + "</text>\n";
        out += "<line x1=\"" + io::format_double(ml) + "\" y1=\"" + io::format_double(sy(yv)) + "\" x2=\"" +
               io::format_double(W - mr) + "\" y2=\"" + io::format_double(sy(yv)) +
               "\" stroke=\"#dddddd\" stroke-width=\"0.5\"/>\n";
    }
    out += "<text x=\"" + io::format_double((ml + W - mr) / 2) + "\" y=\"" + io::format_double(H - 12) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" + x_label + "</text>\n";
    out += "<text x=\"16\" y=\"" + io::format_double((mt + H - mb) / 2) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 16 " +
           io::format_double((mt + H - mb) / 2) + ")\">" + y_label + "</text>\n";

    double legend_y = mt + 6;
    for (const auto& s : series) {
        if (s.scatter) {
            for (std::size_t i = 0; i < s.x.size(); ++i)
                out += "<circle cx=\"" + io::format_double(sx(s.x[i])) + "\" cy=\"" +
                       io::format_double(sy(s.y[i])) + "\" r=\"2.5\" fill=\"" + s.color +
                       "\" fill-opacity=\"0.7\"/>\n";
        } else {
            std::string pts;
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                pts += io::format_double(sx(s.x[i])) + "," + io::format_double(sy(s.y[i]));
                if (i + 1 < s.x.size()) pts += " ";
            }
            out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + s.color +
                   "\" stroke-width=\"1.6\"/>\n";
        }
        out += "<rect x=\"" + io::format_double(W - mr - 150) + "\" y=\"" + io::format_double(legend_y - 9) +
               "\" width=\"12\" height=\"12\" fill=\"" + s.color + "\"/>\n";
        out += "<text x=\"" + io::format_double(W - mr - 132) + "\" y=\"" + io::format_double(legend_y + 1) +
               "\" font-family=\"sans-serif\" font-size=\"12\">" + s.label + "</text>\n";
        legend_y += 18;
    }
    out += "</svg>\n";
    io::write_text_atomic(path, out);
}

} // namespace tgx::svg
