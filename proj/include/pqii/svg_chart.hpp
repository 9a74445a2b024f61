#pragma once

#include <string>
#include <utility>
#include <vector>

namespace pqii {

struct ChartSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;  // (x, y), sorted by caller
};

struct ChartSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<ChartSeries> series;
    // When non-empty, x values are indices into these labels (categorical axis).
    std::vector<std::string> x_tick_labels;
};

// Renders a self-contained SVG line chart: one polyline per series, circle
// markers on vertices, axes with ticks, and a legend. No external assets.
std::string render_line_chart(const ChartSpec& spec);

}  // namespace pqii
