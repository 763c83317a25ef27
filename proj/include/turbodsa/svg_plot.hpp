// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace turbodsa {

struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;  // (x, y), sorted by x
};

// values grouped per x position; one box per (x, series)
struct BoxSeries {
    std::string label;
    std::vector<std::pair<double, std::vector<double>>> groups;
};

void write_line_plot_svg(const std::string& path, const std::string& title,
                         const std::string& x_label, const std::string& y_label,
                         const std::vector<PlotSeries>& series);

void write_box_plot_svg(const std::string& path, const std::string& title,
                        const std::string& x_label, const std::string& y_label,
                        const std::vector<BoxSeries>& series);

}  // namespace turbodsa
