// SPDX-License-Identifier: Apache-2.0
#include "turbodsa/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "turbodsa/errors.hpp"

namespace turbodsa {

namespace {

constexpr double kWidth = 720, kHeight = 480;
constexpr double kLeft = 70, kRight = 40, kTop = 50, kBottom = 60;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

struct Range {
    double lo = 0.0, hi = 1.0;
    void widen(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void pad() {
        if (hi - lo < 1e-12) {
            lo -= 0.5;
            hi += 0.5;
        } else {
            const double m = 0.05 * (hi - lo);
            lo -= m;
            hi += m;
        }
    }
};

struct Canvas {
    std::ostringstream body;
    Range xr, yr;

    double px(double x) const {
        return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * (kWidth - kLeft - kRight);
    }
    double py(double y) const {
        return kHeight - kBottom - (y - yr.lo) / (yr.hi - yr.lo) * (kHeight - kTop - kBottom);
    }

    void axes(const std::string& title, const std::string& xl, const std::string& yl) {
        body << "<rect x='" << kLeft << "' y='" << kTop << "' width='"
             << kWidth - kLeft - kRight << "' height='" << kHeight - kTop - kBottom
             << "' fill='none' stroke='#333'/>\n";
        body << "<text x='" << kWidth / 2 << "' y='24' text-anchor='middle' font-size='15'>"
             << title << "</text>\n";
        body << "<text x='" << kWidth / 2 << "' y='" << kHeight - 14
             << "' text-anchor='middle' font-size='12'>" << xl << "</text>\n";
        body << "<text x='18' y='" << kHeight / 2
             << "' text-anchor='middle' font-size='12' transform='rotate(-90 18 "
             << kHeight / 2 << ")'>" << yl << "</text>\n";
        for (int i = 0; i <= 5; ++i) {
            const double fx = xr.lo + (xr.hi - xr.lo) * i / 5.0;
            const double fy = yr.lo + (yr.hi - yr.lo) * i / 5.0;
            body << "<line x1='" << px(fx) << "' y1='" << kHeight - kBottom << "' x2='"
                 << px(fx) << "' y2='" << kHeight - kBottom + 5 << "' stroke='#333'/>\n";
            body << "<text x='" << px(fx) << "' y='" << kHeight - kBottom + 18
                 << "' text-anchor='middle' font-size='10'>" << std::fixed
                 << std::setprecision(1) << fx << "</text>\n";
            body << "<line x1='" << kLeft - 5 << "' y1='" << py(fy) << "' x2='" << kLeft
                 << "' y2='" << py(fy) << "' stroke='#333'/>\n";
            body << "<text x='" << kLeft - 8 << "' y='" << py(fy) + 3
                 << "' text-anchor='end' font-size='10'>" << std::setprecision(2) << fy
                 << "</text>\n";
        }
    }

    void legend(const std::vector<std::string>& labels) {
        double y = kTop + 14;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const char* color = kPalette[i % 8];
            body << "<rect x='" << kWidth - kRight - 150 << "' y='" << y - 9
                 << "' width='12' height='12' fill='" << color << "'/>\n";
            body << "<text x='" << kWidth - kRight - 133 << "' y='" << y + 2
                 << "' font-size='11'>" << labels[i] << "</text>\n";
            y += 18;
        }
    }

    void save(const std::string& path) {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write figure: " + path);
        out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth << "' height='"
            << kHeight << "'>\n<rect width='100%' height='100%' fill='white'/>\n"
            << body.str() << "</svg>\n";
    }
};

}  // namespace

void write_line_plot_svg(const std::string& path, const std::string& title,
                         const std::string& x_label, const std::string& y_label,
                         const std::vector<PlotSeries>& series) {
    require(!series.empty(), "line plot needs at least one series");
    Canvas c;
    bool first = true;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            if (first) {
                c.xr = {x, x};
                c.yr = {y, y};
                first = false;
            }
            c.xr.widen(x);
            c.yr.widen(y);
        }
    c.xr.pad();
    c.yr.pad();
    c.axes(title, x_label, y_label);

    std::vector<std::string> labels;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = kPalette[i % 8];
        std::ostringstream pts;
        for (const auto& [x, y] : series[i].points) pts << c.px(x) << ',' << c.py(y) << ' ';
        c.body << "<polyline points='" << pts.str() << "' fill='none' stroke='" << color
               << "' stroke-width='2'/>\n";
        for (const auto& [x, y] : series[i].points)
            c.body << "<circle cx='" << c.px(x) << "' cy='" << c.py(y) << "' r='3' fill='"
                   << color << "'/>\n";
        labels.push_back(series[i].label);
    }
    c.legend(labels);
    c.save(path);
}

void write_box_plot_svg(const std::string& path, const std::string& title,
                        const std::string& x_label, const std::string& y_label,
                        const std::vector<BoxSeries>& series) {
    require(!series.empty(), "box plot needs at least one series");
    Canvas c;
    bool first = true;
    for (const auto& s : series)
        for (const auto& [x, values] : s.groups)
            for (double v : values) {
                if (first) {
                    c.xr = {x, x};
                    c.yr = {v, v};
                    first = false;
                }
                c.xr.widen(x);
                c.yr.widen(v);
            }
    c.xr.pad();
    c.yr.pad();
    c.axes(title, x_label, y_label);

    const double slot = 10.0;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = kPalette[i % 8];
        const double shift = (static_cast<double>(i) -
                              static_cast<double>(series.size() - 1) / 2.0) *
                             slot;
        for (const auto& [x, values] : series[i].groups) {
            if (values.empty()) continue;
            std::vector<double> v = values;
            std::sort(v.begin(), v.end());
            const auto quantile = [&](double q) {
                const double pos = q * static_cast<double>(v.size() - 1);
                const std::size_t lo = static_cast<std::size_t>(pos);
                const std::size_t hi = std::min(lo + 1, v.size() - 1);
                return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
            };
            const double q1 = quantile(0.25), q2 = quantile(0.5), q3 = quantile(0.75);
            const double cx = c.px(x) + shift;
            const double half = slot * 0.4;
            c.body << "<line x1='" << cx << "' y1='" << c.py(v.front()) << "' x2='" << cx
                   << "' y2='" << c.py(v.back()) << "' stroke='" << color << "'/>\n";
            c.body << "<rect x='" << cx - half << "' y='" << c.py(q3) << "' width='"
                   << 2 * half << "' height='" << c.py(q1) - c.py(q3) << "' fill='" << color
                   << "' fill-opacity='0.35' stroke='" << color << "'/>\n";
            c.body << "<line x1='" << cx - half << "' y1='" << c.py(q2) << "' x2='"
                   << cx + half << "' y2='" << c.py(q2) << "' stroke='" << color
                   << "' stroke-width='2'/>\n";
        }
        labels.push_back(series[i].label);
    }
    c.legend(labels);
    c.save(path);
}

}  // namespace turbodsa
