#include "nnlab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "nnlab/errors.hpp"

namespace nnlab::svg {

namespace {

constexpr int kPanelW = 460;
constexpr int kPanelH = 320;
constexpr int kMarginL = 64;
constexpr int kMarginR = 16;
constexpr int kMarginT = 36;
constexpr int kMarginB = 48;

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
constexpr int kPaletteN = 10;

std::string esc(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

struct Range {
    double lo = 0.0, hi = 1.0;
    void expand(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void pad() {
        if (hi <= lo) {
            hi = lo + 1.0;
        } else {
            const double m = (hi - lo) * 0.05;
            lo -= m;
            hi += m;
        }
    }
};

std::vector<double> ticks(const Range& r, int n = 5) {
    std::vector<double> out;
    for (int i = 0; i <= n; ++i)
        out.push_back(r.lo + (r.hi - r.lo) * static_cast<double>(i) / n);
    return out;
}

// one panel's plotting area with axes, ticks and labels
void emit_axes(std::ostringstream& os, int x0, int y0, const Range& xr, const Range& yr,
               const std::string& title, const std::string& xlabel, const std::string& ylabel) {
    const int px = x0 + kMarginL, py = y0 + kMarginT;
    const int pw = kPanelW - kMarginL - kMarginR, ph = kPanelH - kMarginT - kMarginB;
    os << "<rect x=\"" << px << "\" y=\"" << py << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    os << "<text x=\"" << x0 + kPanelW / 2 << "\" y=\"" << y0 + 20
       << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << esc(title)
       << "</text>\n";
    os << "<text x=\"" << x0 + kMarginL + pw / 2 << "\" y=\"" << y0 + kPanelH - 10
       << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << esc(xlabel)
       << "</text>\n";
    os << "<text x=\"" << x0 + 14 << "\" y=\"" << py + ph / 2
       << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\" transform=\"rotate(-90 "
       << x0 + 14 << ' ' << py + ph / 2 << ")\">" << esc(ylabel) << "</text>\n";
    for (double t : ticks(xr)) {
        const double fx = px + (t - xr.lo) / (xr.hi - xr.lo) * pw;
        os << "<line x1=\"" << num(fx) << "\" y1=\"" << py + ph << "\" x2=\"" << num(fx)
           << "\" y2=\"" << py + ph + 4 << "\" stroke=\"#333333\"/>\n";
        os << "<text x=\"" << num(fx) << "\" y=\"" << py + ph + 16
           << "\" text-anchor=\"middle\" font-size=\"10\" font-family=\"sans-serif\">" << num(t)
           << "</text>\n";
    }
    for (double t : ticks(yr)) {
        const double fy = py + ph - (t - yr.lo) / (yr.hi - yr.lo) * ph;
        os << "<line x1=\"" << px - 4 << "\" y1=\"" << num(fy) << "\" x2=\"" << px << "\" y2=\""
           << num(fy) << "\" stroke=\"#333333\"/>\n";
        os << "<text x=\"" << px - 6 << "\" y=\"" << num(fy + 3)
           << "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">" << num(t)
           << "</text>\n";
    }
}

void emit_panel(std::ostringstream& os, const LinePlotSpec& spec, int x0, int y0) {
    if (spec.series.empty()) throw config_error("svg: line plot needs at least one series");
    for (const Series& s : spec.series)
        if (s.points.empty()) throw config_error("svg: empty series '" + s.label + "'");

    Range xr{spec.series[0].points[0].first, spec.series[0].points[0].first};
    Range yr{spec.series[0].points[0].second, spec.series[0].points[0].second};
    for (const Series& s : spec.series)
        for (auto [x, y] : s.points) {
            xr.expand(x);
            yr.expand(y);
        }
    xr.pad();
    yr.pad();
    emit_axes(os, x0, y0, xr, yr, spec.title, spec.xlabel, spec.ylabel);

    const int px = x0 + kMarginL, py = y0 + kMarginT;
    const int pw = kPanelW - kMarginL - kMarginR, ph = kPanelH - kMarginT - kMarginB;
    for (std::size_t si = 0; si < spec.series.size(); ++si) {
        const Series& s = spec.series[si];
        os << "<polyline fill=\"none\" stroke=\"" << kPalette[si % kPaletteN]
           << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.points.size(); ++i) {
            const double fx = px + (s.points[i].first - xr.lo) / (xr.hi - xr.lo) * pw;
            const double fy = py + ph - (s.points[i].second - yr.lo) / (yr.hi - yr.lo) * ph;
            if (i) os << ' ';
            os << num(fx) << ',' << num(fy);
        }
        os << "\"/>\n";
        if (!s.label.empty() && spec.series.size() > 1 && si < 12) {
            const int ly = py + 14 + static_cast<int>(si) * 14;
            os << "<line x1=\"" << px + pw - 70 << "\" y1=\"" << ly - 4 << "\" x2=\""
               << px + pw - 52 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << kPalette[si % kPaletteN]
               << "\" stroke-width=\"2\"/>\n";
            os << "<text x=\"" << px + pw - 48 << "\" y=\"" << ly
               << "\" font-size=\"10\" font-family=\"sans-serif\">" << esc(s.label) << "</text>\n";
        }
    }
}

std::string document(int w, int h, const std::string& body) {
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
       << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h << "\" fill=\"#ffffff\"/>\n";
    os << body;
    os << "</svg>\n";
    return os.str();
}

} // namespace

std::string render_line_plot(const LinePlotSpec& spec) {
    std::ostringstream os;
    emit_panel(os, spec, 0, 0);
    return document(kPanelW, kPanelH, os.str());
}

std::string render_line_panels(const std::vector<LinePlotSpec>& panels) {
    if (panels.empty()) throw config_error("svg: no panels");
    std::ostringstream os;
    for (std::size_t i = 0; i < panels.size(); ++i)
        emit_panel(os, panels[i], static_cast<int>(i) * kPanelW, 0);
    return document(kPanelW * static_cast<int>(panels.size()), kPanelH, os.str());
}

std::string render_bar_chart(const BarChartSpec& spec) {
    if (spec.bars.empty()) throw config_error("svg: bar chart needs at least one bar");
    Range yr{0.0, 0.0};
    for (const Bar& b : spec.bars) {
        yr.expand(b.value + b.whisker);
        yr.expand(b.value - b.whisker);
    }
    yr.pad();
    yr.lo = std::min(yr.lo, 0.0);

    std::ostringstream os;
    Range xr{0.0, static_cast<double>(spec.bars.size())};
    emit_axes(os, 0, 0, xr, yr, spec.title, "", spec.ylabel);
    const int px = kMarginL, py = kMarginT;
    const int pw = kPanelW - kMarginL - kMarginR, ph = kPanelH - kMarginT - kMarginB;
    const double slot = static_cast<double>(pw) / static_cast<double>(spec.bars.size());
    auto ypix = [&](double v) { return py + ph - (v - yr.lo) / (yr.hi - yr.lo) * ph; };
    for (std::size_t i = 0; i < spec.bars.size(); ++i) {
        const Bar& b = spec.bars[i];
        const double bx = px + slot * (static_cast<double>(i) + 0.2);
        const double bwid = slot * 0.6;
        const double ytop = ypix(std::max(b.value, 0.0));
        const double ybase = ypix(std::min(b.value, 0.0));
        os << "<rect x=\"" << num(bx) << "\" y=\"" << num(ytop) << "\" width=\"" << num(bwid)
           << "\" height=\"" << num(std::max(ybase - ytop, 0.5)) << "\" fill=\""
           << kPalette[b.group % kPaletteN] << "\"/>\n";
        // whisker: one vertical line spanning value +/- whisker
        const double cx = bx + bwid / 2.0;
        os << "<line x1=\"" << num(cx) << "\" y1=\"" << num(ypix(b.value - b.whisker))
           << "\" x2=\"" << num(cx) << "\" y2=\"" << num(ypix(b.value + b.whisker))
           << "\" stroke=\"#000000\" stroke-width=\"1.5\"/>\n";
        os << "<text x=\"" << num(cx) << "\" y=\"" << py + ph + 28
           << "\" text-anchor=\"middle\" font-size=\"10\" font-family=\"sans-serif\">"
           << esc(b.label) << "</text>\n";
    }
    return document(kPanelW, kPanelH, os.str());
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::trunc | std::ios::binary);
    if (!f) throw io_error("cannot write " + path);
    f << content;
    if (!f) throw io_error("failed writing " + path);
}

} // namespace nnlab::svg
