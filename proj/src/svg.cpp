#include <mawii/report.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace mawii {

namespace {

constexpr double width = 640;
constexpr double height = 420;
constexpr double left = 60;
constexpr double right = 20;
constexpr double top = 20;
constexpr double bottom = 50;

struct Frame
{
    double x0, x1, y0, y1;

    double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
    double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

void open_svg(std::ostringstream& out)
{
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

void axes(std::ostringstream& out, const Frame& f, const std::string& xlabel, const std::string& ylabel,
          bool log_x)
{
    out << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - right << "\" y2=\""
        << height - bottom << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << height - bottom
        << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double x = f.x0 + (f.x1 - f.x0) * k / 4;
        const double y = f.y0 + (f.y1 - f.y0) * k / 4;
        out << "<text x=\"" << num(f.px(x)) << "\" y=\"" << height - bottom + 15 << "\" text-anchor=\"middle\">"
            << tick_label(log_x ? std::pow(10.0, x) : x) << "</text>\n";
        out << "<text x=\"" << left - 5 << "\" y=\"" << num(f.py(y) + 4) << "\" text-anchor=\"end\">"
            << tick_label(y) << "</text>\n";
    }
    out << "<text x=\"" << (left + width - right) / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\">"
        << xlabel << "</text>\n";
    out << "<text transform=\"translate(14," << (top + height - bottom) / 2
        << ") rotate(-90)\" text-anchor=\"middle\">" << ylabel << "</text>\n";
}

} // namespace

std::string sweep_svg(const SweepResult& s)
{
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : s.rows) {
        if (r.nH && *r.nH > 0) pts.emplace_back(std::log10(*r.nH), r.beta_hat);
    }
    Frame f{0, 3, s.beta0 - 1, s.beta0 + 1};
    if (!pts.empty()) {
        const auto [xmin, xmax] = std::minmax_element(pts.begin(), pts.end());
        f.x0 = std::floor(xmin->first * 2) / 2;
        f.x1 = std::ceil(xmax->first * 2) / 2;
        if (f.x1 <= f.x0) f.x1 = f.x0 + 0.5;
        double spread = 0.5;
        for (const auto& p : pts) spread = std::max(spread, std::abs(p.second - s.beta0));
        spread = std::min(spread, 3.0);
        f.y0 = s.beta0 - spread;
        f.y1 = s.beta0 + spread;
    }

    std::ostringstream out;
    open_svg(out);
    // shaded two-SE band around beta0
    std::ostringstream upper;
    std::ostringstream lower;
    constexpr int steps = 100;
    for (int k = 0; k <= steps; ++k) {
        const double x = f.x0 + (f.x1 - f.x0) * k / steps;
        upper << num(f.px(x)) << ',' << num(f.py(std::min(s.band_at(std::pow(10.0, x)).second, f.y1))) << ' ';
        const double xr = f.x1 - (f.x1 - f.x0) * k / steps;
        lower << num(f.px(xr)) << ',' << num(f.py(std::max(s.band_at(std::pow(10.0, xr)).first, f.y0))) << ' ';
    }
    out << "<polygon points=\"" << upper.str() << lower.str() << "\" fill=\"#cccccc\" stroke=\"none\"/>\n";
    out << "<line x1=\"" << num(f.px(f.x0)) << "\" y1=\"" << num(f.py(s.beta0)) << "\" x2=\"" << num(f.px(f.x1))
        << "\" y2=\"" << num(f.py(s.beta0)) << "\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n";
    const double cut = std::log10(weak_id_threshold);
    if (cut > f.x0 && cut < f.x1) {
        out << "<line x1=\"" << num(f.px(cut)) << "\" y1=\"" << top << "\" x2=\"" << num(f.px(cut)) << "\" y2=\""
            << height - bottom << "\" stroke=\"red\" stroke-dasharray=\"2 2\"/>\n";
    }
    for (const auto& [x, y] : pts) {
        const double yc = std::clamp(y, f.y0, f.y1);
        out << "<circle cx=\"" << num(f.px(x)) << "\" cy=\"" << num(f.py(yc)) << "\" r=\"1.8\" fill=\"#1f5fa8\""
            << " fill-opacity=\"0.6\"/>\n";
    }
    axes(out, f, "nH (log scale)", "beta_hat", true);
    out << "</svg>\n";
    return out.str();
}

std::string diagnostic_svg(const DiagnosticSeries& s)
{
    Frame f{s.f_values.minCoeff(), s.f_values.maxCoeff(), 0, 0};
    if (f.x1 <= f.x0) f.x1 = f.x0 + 1;
    // Trim the vertical range to the central 98% so a few large residuals do not flatten the plot.
    std::vector<double> t(s.t_hat.begin(), s.t_hat.end());
    std::sort(t.begin(), t.end());
    const auto q = [&](double p) { return t[static_cast<std::size_t>(p * static_cast<double>(t.size() - 1))]; };
    const double span = std::max(std::abs(q(0.01)), std::abs(q(0.99)));
    f.y0 = -span;
    f.y1 = span > 0 ? span : 1;
    if (span <= 0) f.y0 = -1;

    std::ostringstream out;
    open_svg(out);
    const auto n = s.t_hat.size();
    const Eigen::Index stride = std::max<Eigen::Index>(1, n / 3000);
    for (Eigen::Index i = 0; i < n; i += stride) {
        const double y = s.t_hat(i);
        if (y < f.y0 || y > f.y1) continue;
        out << "<circle cx=\"" << num(f.px(s.f_values(i))) << "\" cy=\"" << num(f.py(y))
            << "\" r=\"1.2\" fill=\"#888888\" fill-opacity=\"0.4\"/>\n";
    }
    std::ostringstream line;
    std::ostringstream band_hi;
    std::ostringstream band_lo;
    for (const auto& b : s.smoothed) {
        line << num(f.px(b.f_center)) << ',' << num(f.py(b.mean)) << ' ';
        band_hi << num(f.px(b.f_center)) << ',' << num(f.py(b.mean + s.critical_value * b.se)) << ' ';
    }
    for (auto it = s.smoothed.rbegin(); it != s.smoothed.rend(); ++it) {
        band_lo << num(f.px(it->f_center)) << ',' << num(f.py(it->mean - s.critical_value * it->se)) << ' ';
    }
    out << "<polygon points=\"" << band_hi.str() << band_lo.str()
        << "\" fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\"/>\n";
    out << "<line x1=\"" << num(f.px(f.x0)) << "\" y1=\"" << num(f.py(0)) << "\" x2=\"" << num(f.px(f.x1))
        << "\" y2=\"" << num(f.py(0)) << "\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n";
    out << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"2\"/>\n";
    axes(out, f, "f(Z, X)", "residual t", false);
    out << "</svg>\n";
    return out.str();
}

} // namespace mawii
