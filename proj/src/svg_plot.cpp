//
// Minimal SVG plot emission. Output is byte-deterministic for fixed input.
//

#include "htsolve/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "htsolve/common.hpp"

namespace hts {

namespace {

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

double tx(double v, bool logscale) { return logscale ? std::log10(v) : v; }

}  // namespace

std::string render_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series)
{
    const double ml = 70, mr = 20, mt = 36, mb = 50;
    const double pw = spec.width - ml - mr, ph = spec.height - mt - mb;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool any = false;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (spec.logx && s.x[i] <= 0.0) continue;
            if (spec.logy && s.y[i] <= 0.0) continue;
            const double vx = tx(s.x[i], spec.logx), vy = tx(s.y[i], spec.logy);
            if (!any) {
                xmin = xmax = vx;
                ymin = ymax = vy;
                any = true;
            }
            xmin = std::min(xmin, vx);
            xmax = std::max(xmax, vx);
            ymin = std::min(ymin, vy);
            ymax = std::max(ymax, vy);
        }
    }
    if (!any) {
        xmin = ymin = 0;
        xmax = ymax = 1;
    }
    if (xmax - xmin < 1e-12) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if (ymax - ymin < 1e-12) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    auto px = [&](double v) { return ml + (tx(v, spec.logx) - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double v) { return mt + ph - (tx(v, spec.logy) - ymin) / (ymax - ymin) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\""
       << spec.height << "\" viewBox=\"0 0 " << spec.width << " " << spec.height << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << spec.width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
       << spec.title << "</text>\n";
    os << "<rect x=\"" << num(ml) << "\" y=\"" << num(mt) << "\" width=\"" << num(pw)
       << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"#404040\"/>\n";
    // axis ticks: 5 per axis on the transformed scale
    for (int t = 0; t <= 4; ++t) {
        const double fx = xmin + (xmax - xmin) * t / 4.0;
        const double fy = ymin + (ymax - ymin) * t / 4.0;
        const double gx = ml + pw * t / 4.0;
        const double gy = mt + ph - ph * t / 4.0;
        const double vx = spec.logx ? std::pow(10.0, fx) : fx;
        const double vy = spec.logy ? std::pow(10.0, fy) : fy;
        os << "<line x1=\"" << num(gx) << "\" y1=\"" << num(mt + ph) << "\" x2=\"" << num(gx)
           << "\" y2=\"" << num(mt + ph + 5) << "\" stroke=\"#404040\"/>\n";
        os << "<text x=\"" << num(gx) << "\" y=\"" << num(mt + ph + 18)
           << "\" text-anchor=\"middle\" font-size=\"10\">" << num(vx) << "</text>\n";
        os << "<line x1=\"" << num(ml - 5) << "\" y1=\"" << num(gy) << "\" x2=\"" << num(ml)
           << "\" y2=\"" << num(gy) << "\" stroke=\"#404040\"/>\n";
        os << "<text x=\"" << num(ml - 8) << "\" y=\"" << num(gy + 3)
           << "\" text-anchor=\"end\" font-size=\"10\">" << num(vy) << "</text>\n";
    }
    os << "<text x=\"" << spec.width / 2 << "\" y=\"" << spec.height - 10
       << "\" text-anchor=\"middle\" font-size=\"12\">" << spec.xlabel << "</text>\n";
    os << "<text x=\"16\" y=\"" << spec.height / 2
       << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
       << spec.height / 2 << ")\">" << spec.ylabel << "</text>\n";
    int li = 0;
    for (const auto& s : series) {
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (spec.logx && s.x[i] <= 0.0) continue;
            if (spec.logy && s.y[i] <= 0.0) continue;
            pts.emplace_back(px(s.x[i]), py(s.y[i]));
        }
        if (s.line && pts.size() > 1) {
            os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
            for (const auto& [x, y] : pts) os << num(x) << "," << num(y) << " ";
            os << "\"/>\n";
        }
        if (s.markers)
            for (const auto& [x, y] : pts)
                os << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"2.5\" fill=\""
                   << s.color << "\"/>\n";
        os << "<text x=\"" << num(ml + 8) << "\" y=\"" << num(mt + 14 + 13 * li)
           << "\" font-size=\"11\" fill=\"" << s.color << "\">" << s.label << "</text>\n";
        ++li;
    }
    os << "</svg>\n";
    return os.str();
}

void write_svg(const std::string& path, const PlotSpec& spec, const std::vector<PlotSeries>& series)
{
    std::ofstream out(path);
    if (!out) throw io_error("write_svg: cannot open " + path);
    out << render_svg(spec, series);
}

}  // namespace hts
