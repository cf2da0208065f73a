#pragma once

#include <string>
#include <vector>

namespace glucast::plot {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    std::string color;  // empty: next palette colour
};

struct Chart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    int width = 900;
    int height = 400;
};

/// Static SVG line chart with one <polyline> per series and a legend.
std::string to_svg(const Chart& chart);

void write_file(const std::string& path, const std::string& text);

}  // namespace glucast::plot
