#include "pqii/svg_chart.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace pqii {

namespace {

constexpr double kWidth = 760;
constexpr double kHeight = 480;
constexpr double kLeft = 80;
constexpr double kRight = 600;   // plot area right edge; legend sits beyond
constexpr double kTop = 56;
constexpr double kBottom = 420;

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c",
                                    "#d62728", "#9467bd", "#8c564b"};

std::string escape_xml(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (const char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c; break;
        }
    }
    return out;
}

std::string fmt_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

struct Range {
    double lo = 0.0;
    double hi = 1.0;
};

Range data_range(const std::vector<ChartSeries>& series, bool use_x) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& s : series) {
        for (const auto& [x, y] : s.points) {
            const double v = use_x ? x : y;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!std::isfinite(lo)) return {0.0, 1.0};
    if (lo == hi) {  // degenerate span: pad around the single value
        const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
        return {lo - pad, hi + pad};
    }
    const double pad = (hi - lo) * 0.05;
    return {lo - pad, hi + pad};
}

// Round tick step to 1/2/5 * 10^k.
double nice_step(double span, int target_ticks) {
    const double raw = span / std::max(1, target_ticks);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double norm = raw / mag;
    double step;
    if (norm <= 1.0) step = 1.0;
    else if (norm <= 2.0) step = 2.0;
    else if (norm <= 5.0) step = 5.0;
    else step = 10.0;
    return step * mag;
}

}  // namespace

std::string render_line_chart(const ChartSpec& spec) {
    if (spec.series.empty()) throw std::invalid_argument("render_line_chart: no series");

    const Range xr = data_range(spec.series, true);
    const Range yr = data_range(spec.series, false);
    const auto sx = [&](double x) {
        return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * (kRight - kLeft);
    };
    const auto sy = [&](double y) {
        return kBottom - (y - yr.lo) / (yr.hi - yr.lo) * (kBottom - kTop);
    };

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << (kLeft + kRight) / 2 << "\" y=\"28\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">" << escape_xml(spec.title)
        << "</text>\n";

    // y ticks and horizontal grid
    const double ystep = nice_step(yr.hi - yr.lo, 5);
    for (double v = std::ceil(yr.lo / ystep) * ystep; v <= yr.hi + 1e-12 * ystep; v += ystep) {
        const double y = sy(v);
        svg << "<line x1=\"" << kLeft << "\" y1=\"" << y << "\" x2=\"" << kRight << "\" y2=\""
            << y << "\" stroke=\"#dddddd\"/>\n"
            << "<text x=\"" << kLeft - 8 << "\" y=\"" << y + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << fmt_num(v) << "</text>\n";
    }

    // x ticks: categorical labels at integer positions, else nice numbers
    if (!spec.x_tick_labels.empty()) {
        for (std::size_t i = 0; i < spec.x_tick_labels.size(); ++i) {
            const double x = sx(double(i));
            svg << "<line x1=\"" << x << "\" y1=\"" << kBottom << "\" x2=\"" << x << "\" y2=\""
                << kBottom + 5 << "\" stroke=\"#333333\"/>\n"
                << "<text x=\"" << x << "\" y=\"" << kBottom + 20
                << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
                << escape_xml(spec.x_tick_labels[i]) << "</text>\n";
        }
    } else {
        const double xstep = nice_step(xr.hi - xr.lo, 6);
        for (double v = std::ceil(xr.lo / xstep) * xstep; v <= xr.hi + 1e-12 * xstep;
             v += xstep) {
            const double x = sx(v);
            svg << "<line x1=\"" << x << "\" y1=\"" << kBottom << "\" x2=\"" << x << "\" y2=\""
                << kBottom + 5 << "\" stroke=\"#333333\"/>\n"
                << "<text x=\"" << x << "\" y=\"" << kBottom + 20
                << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
                << fmt_num(v) << "</text>\n";
        }
    }

    // axes
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
        << kBottom << "\" stroke=\"#333333\"/>\n"
        << "<line x1=\"" << kLeft << "\" y1=\"" << kBottom << "\" x2=\"" << kRight << "\" y2=\""
        << kBottom << "\" stroke=\"#333333\"/>\n"
        << "<text x=\"" << (kLeft + kRight) / 2 << "\" y=\"" << kBottom + 44
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << escape_xml(spec.x_label) << "</text>\n"
        << "<text x=\"20\" y=\"" << (kTop + kBottom) / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
        << "transform=\"rotate(-90 20 " << (kTop + kBottom) / 2 << ")\">"
        << escape_xml(spec.y_label) << "</text>\n";

    // series: one polyline each, with vertex markers and a legend entry
    for (std::size_t s = 0; s < spec.series.size(); ++s) {
        const auto& series = spec.series[s];
        if (series.points.empty()) continue;
        const char* color = kPalette[s % std::size(kPalette)];

        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t p = 0; p < series.points.size(); ++p) {
            if (p) svg << ' ';
            svg << sx(series.points[p].first) << ',' << sy(series.points[p].second);
        }
        svg << "\"/>\n";
        for (const auto& [x, y] : series.points) {
            svg << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y) << "\" r=\"3\" fill=\""
                << color << "\"/>\n";
        }

        const double ly = kTop + 10 + double(s) * 20;
        svg << "<line x1=\"" << kRight + 12 << "\" y1=\"" << ly << "\" x2=\"" << kRight + 34
            << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
            << "<text x=\"" << kRight + 40 << "\" y=\"" << ly + 4
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape_xml(series.name)
            << "</text>\n";
    }

    svg << "</svg>\n";
    return svg.str();
}

}  // namespace pqii
