#pragma once

#include <string>
#include <vector>

namespace ordlab {

struct PlotSeries {
    std::string name;
    std::vector<double> values;
};

// Minimal static SVG emitters for the report stage. Output is plain text and
// deterministic.
void svg_bar_chart(const std::string& path, const std::string& title,
                   const std::vector<std::string>& categories,
                   const std::vector<PlotSeries>& series, const std::string& y_label);

void svg_line_chart(const std::string& path, const std::string& title,
                    const std::vector<double>& xs, const std::vector<PlotSeries>& series,
                    const std::string& x_label, const std::string& y_label);

}  // namespace ordlab
