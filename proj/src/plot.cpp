#include "glucast/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "glucast/core.hpp"

namespace glucast::plot {

namespace {

constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

}  // namespace

std::string to_svg(const Chart& chart) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : chart.series) {
        if (s.x.size() != s.y.size()) throw UsageError("plot series '" + s.name + "' has mismatched x/y lengths");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y0 -= 1, y1 += 1;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;

    const double left = 60, right = 160, top = 40, bottom = 50;
    const double pw = chart.width - left - right, ph = chart.height - top - bottom;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << chart.width << "\" height=\"" << chart.height
        << "\" viewBox=\"0 0 " << chart.width << ' ' << chart.height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << chart.width << "\" height=\"" << chart.height << "\" fill=\"white\"/>\n"
        << "<text x=\"" << left << "\" y=\"24\" font-size=\"15\">" << escape(chart.title) << "</text>\n"
        << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double yv = y0 + (y1 - y0) * i / 4.0;
        const double xv = x0 + (x1 - x0) * i / 4.0;
        out << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">" << tick(yv)
            << "</text>\n";
        out << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(top + ph + 16) << "\" text-anchor=\"middle\">"
            << tick(xv) << "</text>\n";
    }
    out << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(chart.height - 10.0)
        << "\" text-anchor=\"middle\">" << escape(chart.x_label) << "</text>\n";
    out << "<text x=\"14\" y=\"" << num(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
        << num(top + ph / 2) << ")\">" << escape(chart.y_label) << "</text>\n";

    for (std::size_t k = 0; k < chart.series.size(); ++k) {
        const auto& s = chart.series[k];
        const std::string color = s.color.empty() ? kPalette[k % kPalette.size()] : s.color;
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            out << (first ? "" : " ") << num(px(s.x[i])) << ',' << num(py(s.y[i]));
            first = false;
        }
        out << "\"/>\n";
        const double ly = top + 14 + 18.0 * static_cast<double>(k);
        out << "<line x1=\"" << num(left + pw + 12) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(left + pw + 32)
            << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << num(left + pw + 38) << "\" y=\"" << num(ly) << "\">" << escape(s.name) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path);
    f << text;
    if (!f) throw DataError("write failed: " + path);
}

}  // namespace glucast::plot
