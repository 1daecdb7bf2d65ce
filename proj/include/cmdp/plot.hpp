#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace cmdp::plot {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    /// Optional shaded band; empty or the same length as y.
    std::vector<double> lower;
    std::vector<double> upper;
};

struct ChartSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    int width = 720;
    int height = 440;
    /// Points per series after uniform thinning; endpoints are always kept.
    int max_points = 800;
};

/// Standalone SVG line chart with linear axes and a legend.
std::string line_chart_svg(const ChartSpec& spec, const std::vector<Series>& series);
void write_line_chart(const std::filesystem::path& path, const ChartSpec& spec,
                      const std::vector<Series>& series);

} // namespace cmdp::plot
