#include <mawii/report.hpp>
#include <mawii/error.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mawii {

namespace {

std::string fixed(double v, int digits)
{
    if (!std::isfinite(v)) return "-";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string pad_left(const std::string& s, std::size_t width)
{
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width)
{
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

nlohmann::json optional_json(const std::optional<double>& v)
{
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string round_trip(double v)
{
    if (!std::isfinite(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

nlohmann::json to_json(const SimulationReport& r, bool with_reps)
{
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) {
        rows.push_back({
            {"method", method_name(row.method)},
            {"n_ok", row.n_ok},
            {"failures", row.failures},
            {"mean", row.mean},
            {"sd", optional_json(row.sd)},
            {"mean_se", row.mean_se},
            {"coverage", row.coverage},
            {"coverage_mcse", row.coverage_mcse},
            {"mean_nH", optional_json(row.mean_nH)},
        });
    }
    nlohmann::json out = {{"config", to_json(r.config)}, {"rows", rows}};
    if (r.config.scenario == Scenario::baseline && r.config.direct_effect == 1.0) {
        out["ols_limit"] = ols_bias_reference(r.config.gamma, r.config.m, r.config.beta0);
    }
    if (with_reps) {
        nlohmann::json reps = nlohmann::json::array();
        for (const auto& rec : r.reps) {
            nlohmann::json outcomes = nlohmann::json::array();
            for (const auto& o : rec.outcomes) outcomes.push_back(to_json(o));
            reps.push_back({{"rep", rec.rep}, {"outcomes", outcomes}});
        }
        out["reps"] = std::move(reps);
    }
    return out;
}

std::string format_table(const SimulationReport& r)
{
    std::ostringstream out;
    out << pad_right("Method", 14) << pad_left("Mean", 9) << pad_left("SD", 9) << pad_left("SE", 9)
        << pad_left("CP", 8) << '\n';
    for (const auto& row : r.rows) {
        out << pad_right(method_name(row.method), 14) << pad_left(fixed(row.mean, 3), 9)
            << pad_left(row.sd ? fixed(*row.sd, 3) : "-", 9) << pad_left(fixed(row.mean_se, 3), 9)
            << pad_left(fixed(100.0 * row.coverage, 1), 8) << '\n';
    }
    for (const auto& row : r.rows) {
        if (row.mean_nH) out << "nH (" << method_name(row.method) << "): " << fixed(*row.mean_nH, 1) << '\n';
    }
    for (const auto& row : r.rows) {
        if (row.failures > 0) {
            out << "failures (" << method_name(row.method) << "): " << row.failures << " of "
                << row.failures + row.n_ok << '\n';
        }
    }
    return out.str();
}

nlohmann::json to_json(const SweepResult& s)
{
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : s.rows) {
        rows.push_back({{"gamma", r.gamma},
                        {"rep", r.rep},
                        {"beta_hat", r.beta_hat},
                        {"se", optional_json(r.se)},
                        {"nH", optional_json(r.nH)},
                        {"inside_band", r.inside_band}});
    }
    nlohmann::json per_gamma = nlohmann::json::array();
    for (const auto& rep : s.reports) per_gamma.push_back(to_json(rep));
    return {
        {"beta0", s.beta0},
        {"se_curve", {{"log_intercept", s.se_curve.first}, {"log_slope", s.se_curve.second}}},
        {"rows", rows},
        {"inside_fraction_above_50", s.inside_fraction(weak_id_threshold, true)},
        {"inside_fraction_below_50", s.inside_fraction(weak_id_threshold, false)},
        {"reports", per_gamma},
    };
}

std::string format_csv(const SweepResult& s)
{
    std::ostringstream out;
    out << "gamma,rep,beta_hat,se,nH,inside_band\n";
    for (const auto& r : s.rows) {
        out << round_trip(r.gamma) << ',' << r.rep << ',' << round_trip(r.beta_hat) << ','
            << (r.se ? round_trip(*r.se) : "") << ',' << (r.nH ? round_trip(*r.nH) : "") << ','
            << (r.inside_band ? 1 : 0) << '\n';
    }
    return out.str();
}

std::string format_comparison(const std::vector<MethodOutcome>& outcomes)
{
    std::ostringstream out;
    out << pad_right("Method", 14) << pad_left("Est", 10) << pad_left("SE", 10) << pad_left("nH", 10) << '\n';
    for (const auto& o : outcomes) {
        out << pad_right(method_name(o.method), 14);
        if (o.ok) {
            out << pad_left(fixed(o.beta, 4), 10) << pad_left(fixed(o.se, 4), 10)
                << pad_left(o.nH ? fixed(*o.nH, 1) : "", 10);
        } else {
            out << "  failed: " << o.error;
        }
        out << '\n';
    }
    return out.str();
}

std::string format_comparison_csv(const std::vector<MethodOutcome>& outcomes)
{
    std::ostringstream out;
    out << "method,beta,se,nH,error\n";
    for (const auto& o : outcomes) {
        std::string err = o.error;
        for (auto& c : err) {
            if (c == ',' || c == '\n') c = ';';
        }
        out << method_name(o.method) << ',' << (o.ok ? round_trip(o.beta) : "") << ','
            << (o.ok ? round_trip(o.se) : "") << ',' << (o.ok && o.nH ? round_trip(*o.nH) : "") << ',' << err
            << '\n';
    }
    return out.str();
}

std::string format_diagnostic_csv(const DiagnosticSeries& s)
{
    std::ostringstream out;
    out << "bin,f_lo,f_hi,f_center,mean,se,count\n";
    for (std::size_t b = 0; b < s.smoothed.size(); ++b) {
        const auto& bin = s.smoothed[b];
        out << b << ',' << round_trip(bin.f_lo) << ',' << round_trip(bin.f_hi) << ',' << round_trip(bin.f_center) << ','
            << round_trip(bin.mean) << ',' << round_trip(bin.se) << ',' << bin.count << '\n';
    }
    return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write " + path.string(), {{"path", path.string()}});
    out << text;
    if (!out) throw input_error("failed writing " + path.string(), {{"path", path.string()}});
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j)
{
    write_text(path, j.dump(2) + "\n");
}

} // namespace mawii
