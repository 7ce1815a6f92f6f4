#include "ordlab/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ordlab/csv.hpp"
#include "ordlab/errors.hpp"

namespace ordlab {

namespace {

constexpr double kW = 640, kH = 400;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 60;
const char* kColors[] = {"#4878cf", "#ee854a", "#6acc65", "#d65f5f", "#956cb4", "#8c613c"};

struct Scale {
    double lo, hi;
    double map(double v, double px_lo, double px_hi) const {
        if (hi == lo) return 0.5 * (px_lo + px_hi);
        return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo);
    }
};

Scale value_scale(const std::vector<PlotSeries>& series, bool include_zero) {
    double lo = include_zero ? 0.0 : 1e300, hi = include_zero ? 0.0 : -1e300;
    for (const auto& s : series)
        for (double v : s.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (hi == lo) hi = lo + 1.0;
    double pad = 0.05 * (hi - lo);
    return {lo == 0.0 ? 0.0 : lo - pad, hi + pad};
}

void header(std::ostream& os, const std::string& title) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
       << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
          "font-family=\"sans-serif\">"
       << title << "</text>\n";
}

void axes(std::ostream& os, const Scale& ys, const std::string& y_label) {
    os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
       << kH - kBottom << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight
       << "\" y2=\"" << kH - kBottom << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        double v = ys.lo + (ys.hi - ys.lo) * i / 4.0;
        double y = ys.map(v, kH - kBottom, kTop);
        os << "<text x=\"" << kLeft - 8 << "\" y=\"" << y + 4
           << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
           << fmt_double(std::round(v * 1000.0) / 1000.0) << "</text>\n";
        os << "<line x1=\"" << kLeft - 4 << "\" y1=\"" << y << "\" x2=\"" << kLeft << "\" y2=\""
           << y << "\" stroke=\"black\"/>\n";
    }
    os << "<text x=\"16\" y=\"" << (kTop + kH - kBottom) / 2
       << "\" font-size=\"12\" font-family=\"sans-serif\" transform=\"rotate(-90 16 "
       << (kTop + kH - kBottom) / 2 << ")\" text-anchor=\"middle\">" << y_label << "</text>\n";
}

void legend(std::ostream& os, const std::vector<PlotSeries>& series) {
    if (series.size() < 2) return;
    double x = kW - kRight - 150, y = kTop + 6;
    for (size_t s = 0; s < series.size(); ++s) {
        os << "<rect x=\"" << x << "\" y=\"" << y + 14.0 * static_cast<double>(s) - 8
           << "\" width=\"10\" height=\"10\" fill=\"" << kColors[s % 6] << "\"/>\n";
        os << "<text x=\"" << x + 14 << "\" y=\"" << y + 14.0 * static_cast<double>(s)
           << "\" font-size=\"11\" font-family=\"sans-serif\">" << series[s].name << "</text>\n";
    }
}

}  // namespace

void svg_bar_chart(const std::string& path, const std::string& title,
                   const std::vector<std::string>& categories,
                   const std::vector<PlotSeries>& series, const std::string& y_label) {
    for (const auto& s : series)
        if (s.values.size() != categories.size())
            throw ContractError("svg_bar_chart: series/category size mismatch");
    std::ostringstream os;
    header(os, title);
    Scale ys = value_scale(series, true);
    axes(os, ys, y_label);

    const double plot_w = kW - kLeft - kRight;
    const double cat_w = plot_w / static_cast<double>(categories.size());
    const double bar_w = cat_w * 0.8 / static_cast<double>(series.size());
    const double y0 = ys.map(std::max(0.0, ys.lo), kH - kBottom, kTop);

    for (size_t c = 0; c < categories.size(); ++c) {
        for (size_t s = 0; s < series.size(); ++s) {
            double v = series[s].values[c];
            double x = kLeft + cat_w * (static_cast<double>(c) + 0.1) + bar_w * static_cast<double>(s);
            double y = ys.map(v, kH - kBottom, kTop);
            double top = std::min(y, y0), h = std::fabs(y - y0);
            os << "<rect x=\"" << x << "\" y=\"" << top << "\" width=\"" << bar_w * 0.92
               << "\" height=\"" << h << "\" fill=\"" << kColors[s % 6] << "\"/>\n";
        }
        os << "<text x=\"" << kLeft + cat_w * (static_cast<double>(c) + 0.5) << "\" y=\""
           << kH - kBottom + 16
           << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
           << categories[c] << "</text>\n";
    }
    legend(os, series);
    os << "</svg>\n";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArtifactError("svg_bar_chart: cannot open " + path);
    out << os.str();
}

void svg_line_chart(const std::string& path, const std::string& title,
                    const std::vector<double>& xs, const std::vector<PlotSeries>& series,
                    const std::string& x_label, const std::string& y_label) {
    for (const auto& s : series)
        if (s.values.size() != xs.size())
            throw ContractError("svg_line_chart: series/x size mismatch");
    std::ostringstream os;
    header(os, title);
    Scale ys = value_scale(series, false);
    axes(os, ys, y_label);
    Scale xscale{xs.front(), xs.back()};

    for (size_t s = 0; s < series.size(); ++s) {
        os << "<polyline fill=\"none\" stroke=\"" << kColors[s % 6] << "\" stroke-width=\"2\" points=\"";
        for (size_t i = 0; i < xs.size(); ++i) {
            double x = xscale.map(xs[i], kLeft, kW - kRight);
            double y = ys.map(series[s].values[i], kH - kBottom, kTop);
            os << x << "," << y << " ";
        }
        os << "\"/>\n";
        for (size_t i = 0; i < xs.size(); ++i) {
            double x = xscale.map(xs[i], kLeft, kW - kRight);
            double y = ys.map(series[s].values[i], kH - kBottom, kTop);
            os << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"3\" fill=\"" << kColors[s % 6]
               << "\"/>\n";
        }
    }
    for (size_t i = 0; i < xs.size(); ++i) {
        double x = xscale.map(xs[i], kLeft, kW - kRight);
        os << "<text x=\"" << x << "\" y=\"" << kH - kBottom + 16
           << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
           << fmt_double(xs[i]) << "</text>\n";
    }
    os << "<text x=\"" << (kLeft + kW - kRight) / 2 << "\" y=\"" << kH - 16
       << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << x_label
       << "</text>\n";
    legend(os, series);
    os << "</svg>\n";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArtifactError("svg_line_chart: cannot open " + path);
    out << os.str();
}

}  // namespace ordlab
