#include "cmdp/plot.hpp"

#include "cmdp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace cmdp::plot {

namespace {

constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::vector<std::size_t> thin(std::size_t n, int max_points) {
    std::vector<std::size_t> idx;
    if (n == 0) return idx;
    const std::size_t m = std::max<std::size_t>(2, static_cast<std::size_t>(max_points));
    if (n <= m) {
        for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
        return idx;
    }
    for (std::size_t j = 0; j < m; ++j) idx.push_back(j * (n - 1) / (m - 1));
    return idx;
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

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

/// Round tick step: 1, 2 or 5 times a power of ten.
double nice_step(double span, int target) {
    const double raw = span / std::max(1, target);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double f : {1.0, 2.0, 5.0, 10.0})
        if (f * mag >= raw) return f * mag;
    return 10.0 * mag;
}

} // namespace

std::string line_chart_svg(const ChartSpec& spec, const std::vector<Series>& series) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
            if (!s.lower.empty()) y0 = std::min(y0, s.lower[i]);
            if (!s.upper.empty()) y1 = std::max(y1, s.upper[i]);
        }
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    y0 = std::min(y0, 0.0);
    if (x1 <= x0) x1 = x0 + 1;
    if (y1 <= y0) y1 = y0 + 1;

    const double left = 70, right = 20, top = 40, bottom = 55;
    const double pw = spec.width - left - right, ph = spec.height - top - bottom;
    auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto sy = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << spec.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
        << escape(spec.title) << "</text>\n";

    const double xs = nice_step(x1 - x0, 6), ys = nice_step(y1 - y0, 6);
    for (double t = std::ceil(x0 / xs) * xs; t <= x1 + 1e-9 * xs; t += xs) {
        svg << "<line x1=\"" << sx(t) << "\" y1=\"" << top << "\" x2=\"" << sx(t) << "\" y2=\"" << top + ph
            << "\" stroke=\"#e5e5e5\"/>\n";
        svg << "<text x=\"" << sx(t) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">" << fmt(t)
            << "</text>\n";
    }
    for (double t = std::ceil(y0 / ys) * ys; t <= y1 + 1e-9 * ys; t += ys) {
        svg << "<line x1=\"" << left << "\" y1=\"" << sy(t) << "\" x2=\"" << left + pw << "\" y2=\"" << sy(t)
            << "\" stroke=\"#e5e5e5\"/>\n";
        svg << "<text x=\"" << left - 6 << "\" y=\"" << sy(t) + 4 << "\" text-anchor=\"end\">" << fmt(t)
            << "</text>\n";
    }
    svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << spec.height - 12 << "\" text-anchor=\"middle\">"
        << escape(spec.x_label) << "</text>\n";
    svg << "<text transform=\"translate(16," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
        << escape(spec.y_label) << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        if (s.x.size() != s.y.size()) throw ConfigError("plot series '" + s.label + "' has mismatched lengths");
        const char* color = kColors[si % std::size(kColors)];
        const auto idx = thin(s.x.size(), spec.max_points);
        if (!s.lower.empty() && !s.upper.empty()) {
            svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
            for (std::size_t i : idx) svg << sx(s.x[i]) << ',' << sy(s.upper[i]) << ' ';
            for (auto it = idx.rbegin(); it != idx.rend(); ++it) svg << sx(s.x[*it]) << ',' << sy(s.lower[*it]) << ' ';
            svg << "\"/>\n";
        }
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
        for (std::size_t i : idx) svg << sx(s.x[i]) << ',' << sy(s.y[i]) << ' ';
        svg << "\"/>\n";
        const double ly = top + 14 + 16 * static_cast<double>(si);
        svg << "<line x1=\"" << left + 10 << "\" y1=\"" << ly << "\" x2=\"" << left + 30 << "\" y2=\"" << ly
            << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << left + 36 << "\" y=\"" << ly + 4 << "\">" << escape(s.label) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_line_chart(const std::filesystem::path& path, const ChartSpec& spec, const std::vector<Series>& series) {
    std::ofstream out(path);
    if (!out) throw StructuralError("cannot write plot " + path.string());
    out << line_chart_svg(spec, series);
}

} // namespace cmdp::plot
