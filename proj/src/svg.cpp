#include "ecgad/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ecgad/config.hpp"
#include "ecgad/errors.hpp"

namespace ecgad::svg {

namespace {

constexpr int kWidth = 960;
constexpr int kHeight = 320;
constexpr int kMargin = 45;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

void write_line_plot(const std::string& path, const std::string& title,
                     const std::vector<Series>& series,
                     const std::vector<std::pair<int, int>>& shaded_spans) {
    require(!series.empty(), "write_line_plot: no series");
    const int n = static_cast<int>(series[0].values.size());
    require(n >= 2, "write_line_plot: series too short");
    for (const auto& s : series)
        require(static_cast<int>(s.values.size()) == n, "write_line_plot: series length mismatch");

    double lo = series[0].values.minCoeff(), hi = series[0].values.maxCoeff();
    for (const auto& s : series) {
        lo = std::min(lo, s.values.minCoeff());
        hi = std::max(hi, s.values.maxCoeff());
    }
    if (hi <= lo) hi = lo + 1.0;

    const double px = static_cast<double>(kWidth - 2 * kMargin);
    const double py = static_cast<double>(kHeight - 2 * kMargin);
    auto xm = [&](int i) { return kMargin + px * i / (n - 1); };
    auto ym = [&](double v) { return kHeight - kMargin - py * (v - lo) / (hi - lo); };

    std::ofstream out(path);
    if (!out) throw DataError("cannot write SVG: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kMargin << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
        << title << "</text>\n";

    for (const auto& [a, b] : shaded_spans) {
        const double x0 = xm(std::clamp(a, 0, n - 1));
        const double x1 = xm(std::clamp(b, 0, n - 1));
        out << "<rect x=\"" << fmt(x0) << "\" y=\"" << kMargin << "\" width=\"" << fmt(x1 - x0)
            << "\" height=\"" << kHeight - 2 * kMargin << "\" fill=\"#ffb3b3\" opacity=\"0.5\"/>\n";
    }

    // axes
    out << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\""
        << kWidth - kMargin << "\" y2=\"" << kHeight - kMargin
        << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
    out << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin << "\" y2=\""
        << kHeight - kMargin << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
    out << "<text x=\"4\" y=\"" << kMargin + 4 << "\" font-family=\"sans-serif\" font-size=\"10\">"
        << fmt(hi) << "</text>\n";
    out << "<text x=\"4\" y=\"" << kHeight - kMargin << "\" font-family=\"sans-serif\" font-size=\"10\">"
        << fmt(lo) << "</text>\n";

    int legend_x = kMargin + 10;
    for (const auto& s : series) {
        out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1\" points=\"";
        for (int i = 0; i < n; ++i) out << fmt(xm(i)) << "," << fmt(ym(s.values[i])) << " ";
        out << "\"/>\n";
        out << "<text x=\"" << legend_x << "\" y=\"" << kMargin - 6
            << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << s.color << "\">" << s.name
            << "</text>\n";
        legend_x += 14 * static_cast<int>(s.name.size()) / 2 + 30;
    }
    out << "</svg>\n";
}

void write_grouped_bars(const std::string& path, const std::string& title,
                        const std::vector<std::string>& metric_names,
                        const std::vector<BarGroup>& groups) {
    require(!groups.empty() && !metric_names.empty(), "write_grouped_bars: empty input");
    static const char* palette[] = {"#4878cf", "#ee854a", "#6acc65", "#d65f5f", "#956cb4"};
    const int n_metrics = static_cast<int>(metric_names.size());
    for (const auto& g : groups)
        require(static_cast<int>(g.values.size()) == n_metrics,
                "write_grouped_bars: group value count mismatch");

    const double px = static_cast<double>(kWidth - 2 * kMargin);
    const double py = static_cast<double>(kHeight - 2 * kMargin);
    const double group_w = px / groups.size();
    const double bar_w = group_w / (n_metrics + 1);

    std::ofstream out(path);
    if (!out) throw DataError("cannot write SVG: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kMargin << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
        << title << "</text>\n";
    out << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\""
        << kWidth - kMargin << "\" y2=\"" << kHeight - kMargin
        << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";

    for (size_t gi = 0; gi < groups.size(); ++gi) {
        const double gx = kMargin + group_w * gi;
        for (int m = 0; m < n_metrics; ++m) {
            const double v = std::clamp(groups[gi].values[m], 0.0, 1.0);
            const double h = py * v;
            out << "<rect x=\"" << fmt(gx + bar_w * (m + 0.5)) << "\" y=\""
                << fmt(kHeight - kMargin - h) << "\" width=\"" << fmt(bar_w * 0.9) << "\" height=\""
                << fmt(h) << "\" fill=\"" << palette[m % 5] << "\"/>\n";
        }
        out << "<text x=\"" << fmt(gx + group_w / 2) << "\" y=\"" << kHeight - kMargin + 16
            << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">"
            << groups[gi].label << "</text>\n";
    }
    int lx = kMargin;
    for (int m = 0; m < n_metrics; ++m) {
        out << "<rect x=\"" << lx << "\" y=\"" << kMargin - 14
            << "\" width=\"10\" height=\"10\" fill=\"" << palette[m % 5] << "\"/>\n";
        out << "<text x=\"" << lx + 14 << "\" y=\"" << kMargin - 5
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << metric_names[m] << "</text>\n";
        lx += 14 * static_cast<int>(metric_names[m].size()) / 2 + 40;
    }
    out << "</svg>\n";
}

}  // namespace ecgad::svg
