#pragma once

#include <string>
#include <utility>
#include <vector>

namespace nnlab::svg {

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

struct LinePlotSpec {
    std::string title;
    std::string xlabel;
    std::string ylabel;
    std::vector<Series> series;
};

struct Bar {
    std::string label;
    double value = 0.0;
    double whisker = 0.0; // drawn as value +/- whisker
    int group = 0;        // color group
};

struct BarChartSpec {
    std::string title;
    std::string ylabel;
    std::vector<Bar> bars;
};

// Standalone well-formed SVG text. Empty series are rejected.
std::string render_line_plot(const LinePlotSpec& spec);
std::string render_line_panels(const std::vector<LinePlotSpec>& panels);
std::string render_bar_chart(const BarChartSpec& spec);

void write_file(const std::string& path, const std::string& content);

} // namespace nnlab::svg
