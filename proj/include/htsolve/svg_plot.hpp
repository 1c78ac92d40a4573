#pragma once
//
// Deterministic native SVG line plots (no timestamps, fixed formatting).
//

#include <string>
#include <vector>

namespace hts {

struct PlotSeries {
    std::string label;
    std::vector<double> x, y;
    bool markers = true;
    bool line = true;
    std::string color = "#1f6fb2";
};

struct PlotSpec {
    std::string title, xlabel, ylabel;
    bool logx = false, logy = false;
    int width = 640, height = 440;
};

std::string render_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series);
void write_svg(const std::string& path, const PlotSpec& spec,
               const std::vector<PlotSeries>& series);

}  // namespace hts
