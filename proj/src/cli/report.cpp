#include "trajpred/cli/report.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <tuple>

#include "trajpred/trajectory_csv.hpp"

namespace trajpred::cli {
namespace {

constexpr double kSize = 480.0;
constexpr double kMargin = 60.0;
constexpr double kPlot = kSize - 2.0 * kMargin;

// Fixed two-decimal coordinates keep the file byte-stable.
std::string coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

double px(double x) { return kMargin + x * kPlot; }
double py(double y) { return kSize - kMargin - y * kPlot; }

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

void write_reliability_svg(std::ostream& out, const CalibrationCurve& curve, std::span<const std::size_t> horizons) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize
        << "\" viewBox=\"0 0 " << kSize << ' ' << kSize << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kPlot << "\" height=\"" << kPlot
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 10; ++i) {
        const double v = i / 10.0;
        out << "<line x1=\"" << coord(px(v)) << "\" y1=\"" << coord(py(0.0)) << "\" x2=\"" << coord(px(v)) << "\" y2=\""
            << coord(py(0.0) + 5.0) << "\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << coord(px(0.0) - 5.0) << "\" y1=\"" << coord(py(v)) << "\" x2=\"" << coord(px(0.0))
            << "\" y2=\"" << coord(py(v)) << "\" stroke=\"black\"/>\n";
        if (i % 2 == 0) {
            out << "<text x=\"" << coord(px(v)) << "\" y=\"" << coord(py(0.0) + 20.0) << "\" text-anchor=\"middle\">"
                << coord(v).substr(0, 3) << "</text>\n";
            out << "<text x=\"" << coord(px(0.0) - 8.0) << "\" y=\"" << coord(py(v) + 4.0) << "\" text-anchor=\"end\">"
                << coord(v).substr(0, 3) << "</text>\n";
        }
    }
    out << "<text x=\"" << coord(kSize / 2.0) << "\" y=\"" << coord(kSize - 15.0)
        << "\" text-anchor=\"middle\">expected confidence level 1 - alpha</text>\n";
    out << "<text x=\"15\" y=\"" << coord(kSize / 2.0) << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
        << coord(kSize / 2.0) << ")\">observed frequency</text>\n";
    out << "<line x1=\"" << coord(px(0.0)) << "\" y1=\"" << coord(py(0.0)) << "\" x2=\"" << coord(px(1.0)) << "\" y2=\""
        << coord(py(1.0)) << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";

    std::size_t drawn = 0;
    for (const std::size_t h : horizons) {
        if (h == 0 || h > curve.num_horizons()) continue;
        const char* color = kPalette[drawn % std::size(kPalette)];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << coord(px(0.0))
            << ',' << coord(py(0.0));
        const auto& observed = curve.observed[h - 1];
        for (std::size_t i = 0; i < curve.levels.size(); ++i)
            out << ' ' << coord(px(curve.levels[i])) << ',' << coord(py(observed[i]));
        out << ' ' << coord(px(1.0)) << ',' << coord(py(1.0)) << "\"/>\n";
        const double ly = kMargin + 15.0 + 16.0 * static_cast<double>(drawn);
        out << "<line x1=\"" << coord(kMargin + 10.0) << "\" y1=\"" << coord(ly - 4.0) << "\" x2=\""
            << coord(kMargin + 30.0) << "\" y2=\"" << coord(ly - 4.0) << "\" stroke=\"" << color
            << "\" stroke-width=\"1.5\"/>\n";
        out << "<text x=\"" << coord(kMargin + 35.0) << "\" y=\"" << coord(ly) << "\">t + "
            << coord(static_cast<double>(h) * curve.dt) << " s</text>\n";
        ++drawn;
    }
    out << "</svg>\n";
}

void write_history_csv(std::ostream& out, std::span<const EpochLog> history) {
    out << "epoch,lr,train_loss,eval_loss\n";
    for (const EpochLog& e : history)
        out << e.epoch << ',' << format_double(e.lr) << ',' << format_double(e.train_loss) << ','
            << (std::isnan(e.eval_loss) ? std::string("nan") : format_double(e.eval_loss)) << '\n';
}

void write_windows_csv(std::ostream& out, std::span<const PredictedWindow> windows) {
    out << "window,track_id,t,anchor_x,anchor_y,heading\n";
    for (std::size_t w = 0; w < windows.size(); ++w) {
        const PredictedWindow& pw = windows[w];
        out << w << ',' << pw.track_id << ',' << format_double(pw.t) << ',' << format_double(pw.anchor.origin.x) << ','
            << format_double(pw.anchor.origin.y) << ',' << format_double(pw.anchor.heading) << '\n';
    }
}

void write_mixtures_csv(std::ostream& out, std::span<const PredictedWindow> windows) {
    out << "window,h,m,c,mu_x,mu_y,sigma_x,sigma_y,rho\n";
    for (std::size_t w = 0; w < windows.size(); ++w) {
        const auto& horizons = windows[w].forecast.horizons;
        for (std::size_t h = 0; h < horizons.size(); ++h)
            for (std::size_t m = 0; m < horizons[h].size(); ++m) {
                const GaussComponent& g = horizons[h][m];
                out << w << ',' << h + 1 << ',' << m << ',' << format_double(g.weight) << ','
                    << format_double(g.mean.x) << ',' << format_double(g.mean.y) << ',' << format_double(g.sigma_x)
                    << ',' << format_double(g.sigma_y) << ',' << format_double(g.rho) << '\n';
            }
    }
}

void write_contours_csv(std::ostream& out, std::span<const ContourRing> rings) {
    out << "window,h,q,ring,vertex,x,y\n";
    std::map<std::tuple<std::size_t, std::size_t, double>, std::size_t> ring_no;
    for (const ContourRing& r : rings) {
        const std::size_t id = ring_no[{r.window, r.horizon, r.level}]++;
        for (std::size_t v = 0; v < r.points.size(); ++v)
            out << r.window << ',' << r.horizon << ',' << format_double(r.level) << ',' << id << ',' << v << ','
                << format_double(r.points[v].x) << ',' << format_double(r.points[v].y) << '\n';
    }
}

}  // namespace trajpred::cli
