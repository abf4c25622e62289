#include "shiftdecomp/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace shiftdecomp {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

struct Bar {
    std::string label;
    double point, lo, hi;
};

std::string render_bars(const std::string& title, const std::vector<Bar>& bars,
                        const double* total_marker) {
    const double width = 640.0, bar_h = 26.0, gap = 10.0, left = 150.0, top = 48.0;
    const double height = top + bars.size() * (bar_h + gap) + 40.0;

    double lo = 0.0, hi = 0.0;
    for (const auto& b : bars) {
        lo = std::min({lo, b.lo, b.point});
        hi = std::max({hi, b.hi, b.point});
    }
    if (total_marker) {
        lo = std::min(lo, *total_marker);
        hi = std::max(hi, *total_marker);
    }
    if (hi - lo < 1e-12) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double pad = 0.08 * (hi - lo);
    lo -= pad;
    hi += pad;
    const double plot_w = width - left - 30.0;
    auto xpos = [&](double v) { return left + (v - lo) / (hi - lo) * plot_w; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width) << "\" height=\""
       << fmt(height) << "\" font-family=\"monospace\" font-size=\"12\">\n";
    os << "<text x=\"12\" y=\"22\" font-size=\"15\">" << title << "</text>\n";
    os << "<line x1=\"" << fmt(xpos(0.0)) << "\" y1=\"" << fmt(top - 8.0) << "\" x2=\""
       << fmt(xpos(0.0)) << "\" y2=\"" << fmt(height - 28.0)
       << "\" stroke=\"#888\" stroke-dasharray=\"3,3\"/>\n";

    double y = top;
    for (const auto& b : bars) {
        const double x0 = xpos(std::min(0.0, b.point)), x1 = xpos(std::max(0.0, b.point));
        os << "<text x=\"8\" y=\"" << fmt(y + bar_h - 8.0) << "\">" << b.label << "</text>\n";
        os << "<rect x=\"" << fmt(x0) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(x1 - x0)
           << "\" height=\"" << fmt(bar_h - 6.0) << "\" fill=\"#4878a8\"/>\n";
        const double cy = y + (bar_h - 6.0) / 2.0;
        os << "<line x1=\"" << fmt(xpos(b.lo)) << "\" y1=\"" << fmt(cy) << "\" x2=\""
           << fmt(xpos(b.hi)) << "\" y2=\"" << fmt(cy) << "\" stroke=\"#222\"/>\n";
        for (double v : {b.lo, b.hi})
            os << "<line x1=\"" << fmt(xpos(v)) << "\" y1=\"" << fmt(cy - 5.0) << "\" x2=\""
               << fmt(xpos(v)) << "\" y2=\"" << fmt(cy + 5.0) << "\" stroke=\"#222\"/>\n";
        os << "<text x=\"" << fmt(xpos(b.hi) + 6.0) << "\" y=\"" << fmt(y + bar_h - 8.0) << "\">"
           << fmt(b.point) << " [" << fmt(b.lo) << ", " << fmt(b.hi) << "]</text>\n";
        y += bar_h + gap;
    }
    if (total_marker) {
        os << "<line x1=\"" << fmt(xpos(*total_marker)) << "\" y1=\"" << fmt(top - 8.0)
           << "\" x2=\"" << fmt(xpos(*total_marker)) << "\" y2=\"" << fmt(height - 28.0)
           << "\" stroke=\"#c04030\"/>\n";
        os << "<text x=\"" << fmt(xpos(*total_marker) + 4.0) << "\" y=\"" << fmt(top - 12.0)
           << "\" fill=\"#c04030\">total " << fmt(*total_marker) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::vector<Bar> attribution_bars(const DetailedSection& d) {
    std::vector<Bar> bars;
    for (std::size_t k = 1; k < d.attribution.phi.size(); ++k) {
        const auto& e = d.attribution.phi[k];
        const std::string label =
            k - 1 < d.variable_names.size() ? d.variable_names[k - 1] : "z" + std::to_string(k);
        bars.push_back({label, e.point, e.ci_lo, e.ci_hi});
    }
    std::stable_sort(bars.begin(), bars.end(),
                     [](const Bar& a, const Bar& b) { return a.point > b.point; });
    if (!d.attribution.phi.empty()) {
        const auto& e0 = d.attribution.phi[0];
        bars.push_back({"(empty set)", e0.point, e0.ci_lo, e0.ci_hi});
    }
    return bars;
}

}  // namespace

std::string render_svg(const DecompositionReport& report, SvgPanel panel) {
    switch (panel) {
        case SvgPanel::aggregate: {
            if (!report.has_aggregate) throw DataError("render: report has no aggregate section");
            const auto& a = report.aggregate;
            std::vector<Bar> bars = {
                {"baseline", a.baseline.point, a.baseline.ci_lo, a.baseline.ci_hi},
                {"covariate", a.covariate.point, a.covariate.ci_lo, a.covariate.ci_hi},
                {"outcome", a.outcome.point, a.outcome.ci_lo, a.outcome.ci_hi},
            };
            const double total = a.total.point;
            return render_bars("aggregate decomposition", bars, &total);
        }
        case SvgPanel::detailed_covariate: {
            if (!report.detailed_covariate.present)
                throw DataError("render: report has no detailed_covariate section");
            return render_bars("conditional covariate shift attributions",
                               attribution_bars(report.detailed_covariate), nullptr);
        }
        case SvgPanel::detailed_outcome: {
            if (!report.detailed_outcome.present)
                throw DataError("render: report has no detailed_outcome section");
            return render_bars("conditional outcome shift attributions",
                               attribution_bars(report.detailed_outcome), nullptr);
        }
    }
    throw std::logic_error("render_svg: unknown panel");
}

}  // namespace shiftdecomp
