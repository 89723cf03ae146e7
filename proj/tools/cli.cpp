#include "cli.hpp"

#include <mawii/data.hpp>
#include <mawii/error.hpp>
#include <mawii/inference.hpp>
#include <mawii/report.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

namespace mawii::cli {

namespace {

std::string fmt(double v, int digits)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& s, const std::string& what)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw input_error("cannot parse " + what + " value '" + s + "'", {{what, s}});
    }
}

Schema load_schema(const std::string& spec)
{
    if (spec.empty()) return {};
    if (std::filesystem::exists(spec)) return Schema::from_file(spec);
    return Schema::parse(spec);
}

Dataset load_input(const RunConfig& cfg)
{
    if (cfg.input.empty()) throw input_error("--input is required for this command");
    return load_dataset(cfg.input, load_schema(cfg.schema));
}

void prepare_out_dir(const RunConfig& cfg)
{
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) throw input_error("cannot create output directory " + cfg.out_dir.string(), {{"out", cfg.out_dir.string()}});
}

SimulationConfig simulation_config(const RunConfig& cfg)
{
    auto sim = cfg.simulation;
    sim.optimizer = cfg.optimizer;
    sim.alpha = cfg.alpha;
    if (sim.scenario == Scenario::custom) {
        if (cfg.genotypes.empty()) throw input_error("scenario 'custom' needs --genotypes");
        sim.genotype_pool = std::make_shared<const Matrix>(load_genotypes(cfg.genotypes));
    }
    return sim;
}

ProgressCallback progress_for(const RunConfig& cfg, std::ostream& err)
{
    if (!cfg.verbose) return {};
    return [&err](int done, int total) {
        if (done == total || done % 10 == 0) err << "  rep " << done << " / " << total << '\n';
    };
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err)
{
    for (const auto& w : warnings) err << "warning: " << w << '\n';
}

} // namespace

int cmd_estimate(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    prepare_out_dir(cfg);
    const auto d = load_input(cfg);
    const auto fit = fit_nuisance(d);
    const MomentContext ctx(d, fit);
    const auto solve = minimize_cue(ctx, cfg.optimizer);
    if (cfg.verbose) {
        err << "n = " << d.n() << ", m = " << d.m() << ", d_x = " << d.d_x() << '\n';
        err << "optimizer: " << solve.n_evaluations << " evaluations"
            << (solve.discarded_boundary ? ", boundary candidate discarded" : "") << '\n';
    }
    const auto est = variance_estimate(ctx, solve, cfg.alpha);

    std::vector<std::string> warnings;
    if (auto w = weak_id_warning(est)) warnings.push_back(*w);

    auto j = to_json(est);
    j["warnings"] = warnings;
    j["m"] = d.m();
    j["d_x"] = d.d_x();
    j["optimizer"] = to_json(solve);
    j["optimizer"]["bounds"] = {cfg.optimizer.lo, cfg.optimizer.hi};
    j["heteroscedasticity_screen"] = to_json(heteroscedasticity_screen(d));
    if (fit.bandwidth) j["bandwidth"] = *fit.bandwidth;
    write_json(cfg.out_dir / "estimate.json", j);

    out << "beta_hat = " << fmt(est.beta_hat, 4) << " (SE " << fmt(est.se, 4) << "), "
        << fmt(100 * (1 - cfg.alpha), 0) << "% CI [" << fmt(est.ci.first, 4) << ", " << fmt(est.ci.second, 4)
        << "], nH = " << fmt(est.nH, 1) << '\n';
    print_warnings(warnings, err);
    return success;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    prepare_out_dir(cfg);
    const auto sim = simulation_config(cfg);
    sim.validate();
    if (cfg.write_data) {
        write_dataset(cfg.out_dir / "data.csv", generate(sim, 0).data);
    }
    const auto report = run_monte_carlo(sim, progress_for(cfg, err));
    write_json(cfg.out_dir / "report.json", to_json(report, cfg.with_reps));
    const auto table = format_table(report);
    write_text(cfg.out_dir / "report.txt", table);
    out << table;
    return success;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    prepare_out_dir(cfg);
    const auto sim = simulation_config(cfg);
    const auto sweep = weak_id_sweep(cfg.gammas, sim, progress_for(cfg, err));
    write_text(cfg.out_dir / "sweep.csv", format_csv(sweep));
    write_json(cfg.out_dir / "sweep.json", to_json(sweep));
    if (cfg.svg) write_text(cfg.out_dir / "sweep.svg", sweep_svg(sweep));

    for (const auto& r : sweep.reports) {
        const auto& row = r.rows.front();
        out << "gamma = " << fmt(r.config.gamma, 3) << ": mean = " << fmt(row.mean, 3)
            << ", mean nH = " << (row.mean_nH ? fmt(*row.mean_nH, 1) : "-") << ", failures = " << row.failures
            << '\n';
    }
    out << "inside two-SE band: nH > 50: " << fmt(sweep.inside_fraction(weak_id_threshold, true), 3)
        << ", nH <= 50: " << fmt(sweep.inside_fraction(weak_id_threshold, false), 3) << '\n';
    return success;
}

int cmd_diagnose(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    prepare_out_dir(cfg);
    const auto d = load_input(cfg);
    const auto fit = fit_nuisance(d);
    const MomentContext ctx(d, fit);
    const auto solve = minimize_cue(ctx, cfg.optimizer);
    std::vector<std::string> warnings;
    if (solve.boundary_flag) warnings.push_back("CUE solution lies on the optimizer boundary");

    const auto series = diagnostic_series(d, fit, solve.beta_hat, diagnostic_function(cfg.diagnostic_f));
    auto j = to_json(series, cfg.with_reps);
    j["beta_hat"] = solve.beta_hat;
    j["f"] = cfg.diagnostic_f;
    j["warnings"] = warnings;
    write_json(cfg.out_dir / "diagnostic.json", j);
    write_text(cfg.out_dir / "diagnostic.csv", format_diagnostic_csv(series));
    if (cfg.svg) write_text(cfg.out_dir / "diagnostic.svg", diagnostic_svg(series));

    out << "beta_hat = " << fmt(solve.beta_hat, 4) << ", centered_flag = " << (series.centered_flag ? "true" : "false")
        << '\n';
    print_warnings(warnings, err);
    return success;
}

int cmd_compare(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    prepare_out_dir(cfg);
    const auto d = load_input(cfg);
    const auto outcomes = run_methods(d, cfg.simulation.methods, cfg.optimizer, cfg.alpha);
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& o : outcomes) rows.push_back(to_json(o));
    write_json(cfg.out_dir / "comparison.json", {{"methods", rows}});
    write_text(cfg.out_dir / "comparison.csv", format_comparison_csv(outcomes));
    const auto table = format_comparison(outcomes);
    write_text(cfg.out_dir / "comparison.txt", table);
    out << table;
    for (const auto& o : outcomes) print_warnings(o.warnings, err);
    return success;
}

namespace {

void report_error(const std::string& type, const std::string& message, const nlohmann::json& detail,
                  const std::filesystem::path& out_dir, std::ostream& err)
{
    const nlohmann::json j = {{"error", {{"type", type}, {"message", message}, {"detail", detail}}}};
    err << j.dump() << '\n';
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (!ec) {
        try {
            write_json(out_dir / "error.json", j);
        } catch (const std::exception&) {
            // the message already went to err
        }
    }
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    RunConfig cfg;
    CLI::App app{"Causal effect estimation with many weak invalid instruments (GENIUS-MAWII)", "mawii"};
    app.fallthrough();
    app.require_subcommand(1, 1);
    app.set_config("--config", "", "Flat key=value file; command-line flags take precedence");

    std::string bounds = "-10,10";
    std::string scenario = "baseline";
    std::string methods = "all";
    std::string gammas = "0.01,0.02,0.03,0.04,0.05";
    std::string input;
    std::string out_dir = "out";
    std::string genotypes;
    std::uint64_t seed = cfg.simulation.seed;

    app.add_option("--input", input, "Delimited data file (CSV or TSV)");
    app.add_option("--schema", cfg.schema, "Schema file or inline text, e.g. 'exposure=bmi;outcome=sbp;snps=rs*'");
    // Config files hand comma lists over as several values; join them back.
    auto as_list = [](CLI::Option* opt) { opt->delimiter(',')->multi_option_policy(CLI::MultiOptionPolicy::Join); };
    as_list(app.add_option("--bounds", bounds, "Optimizer interval lo,hi (write --bounds=-5,5 for a negative lo)"));
    app.add_option("--grid", cfg.optimizer.grid_points, "Optimizer grid points")->capture_default_str();
    app.add_option("--alpha", cfg.alpha, "Confidence level is 1 - alpha")->capture_default_str();
    app.add_option("--scenario", scenario, "baseline, covariate, interact_y, interact_a or custom")
        ->capture_default_str();
    app.add_option("--m", cfg.simulation.m, "Number of SNPs")->capture_default_str();
    app.add_option("--n", cfg.simulation.n, "Sample size")->capture_default_str();
    app.add_option("--gamma", cfg.simulation.gamma, "Heteroscedasticity scale")->capture_default_str();
    app.add_option("--beta0", cfg.simulation.beta0, "True causal effect")->capture_default_str();
    app.add_option("--direct-effect", cfg.simulation.direct_effect, "Coefficient on the SNP sum in the outcome")
        ->capture_default_str();
    app.add_option("--reps", cfg.simulation.n_reps, "Monte Carlo replicates")->capture_default_str();
    app.add_option("--seed", seed, "Random seed")->capture_default_str();
    app.add_option("--workers", cfg.simulation.workers, "Worker threads (0: all cores)")->capture_default_str();
    as_list(app.add_option("--methods", methods, "Comma-separated methods or 'all'")->capture_default_str());
    as_list(app.add_option("--gammas", gammas, "Sweep values of gamma")->capture_default_str());
    app.add_option("--genotypes", genotypes, "Genotype pool for scenario custom");
    app.add_option("--diag-f", cfg.diagnostic_f, "fitted_exposure_sq or snp_sum_sq")->capture_default_str();
    app.add_option("--out", out_dir, "Output directory")->capture_default_str();
    app.add_flag("--svg", cfg.svg, "Also write an SVG plot");
    app.add_flag("--with-reps", cfg.with_reps, "Include per-replicate (or per-point) records in JSON");
    app.add_flag("--write-data", cfg.write_data, "simulate: also write replicate 0 as data.csv");
    app.add_flag("-v,--verbose", cfg.verbose, "Progress and solver details on stderr");

    auto* estimate = app.add_subcommand("estimate", "Estimate the causal effect from a data file");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo study of the estimators");
    auto* sweep = app.add_subcommand("sweep", "Weak-identification sweep over gamma");
    auto* diagnose = app.add_subcommand("diagnose", "Residual diagnostic for the model assumptions");
    auto* compare = app.add_subcommand("compare", "Run several estimators on one data file");

    std::vector<std::string> storage(args.begin(), args.end());
    if (storage.empty()) storage.emplace_back("mawii");
    std::vector<char*> argv;
    for (auto& s : storage) argv.push_back(s.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return success;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return success;
    } catch (const CLI::ParseError& e) {
        report_error("input_error", e.what(), nlohmann::json::object(), out_dir, err);
        return input_failure;
    }
    cfg.out_dir = out_dir;

    try {
        const auto lohi = split_list(bounds);
        if (lohi.size() != 2) throw input_error("--bounds expects lo,hi", {{"bounds", bounds}});
        cfg.optimizer.lo = to_double(lohi[0], "bounds");
        cfg.optimizer.hi = to_double(lohi[1], "bounds");
        cfg.optimizer.validate();
        cfg.input = input;
        cfg.genotypes = genotypes;
        cfg.simulation.seed = seed;
        cfg.simulation.scenario = parse_scenario(scenario);
        cfg.simulation.methods = parse_methods(methods);
        cfg.gammas.clear();
        for (const auto& g : split_list(gammas)) cfg.gammas.push_back(to_double(g, "gammas"));
        diagnostic_function(cfg.diagnostic_f);

        if (estimate->parsed()) return cmd_estimate(cfg, out, err);
        if (simulate->parsed()) return cmd_simulate(cfg, out, err);
        if (sweep->parsed()) return cmd_sweep(cfg, out, err);
        if (diagnose->parsed()) return cmd_diagnose(cfg, out, err);
        if (compare->parsed()) return cmd_compare(cfg, out, err);
        throw input_error("no command given");
    } catch (const input_error& e) {
        report_error("input_error", e.what(), e.detail(), cfg.out_dir, err);
        return input_failure;
    } catch (const estimation_error& e) {
        report_error("estimation_error", e.what(), e.detail(), cfg.out_dir, err);
        return estimation_failure;
    } catch (const std::exception& e) {
        report_error("error", e.what(), nlohmann::json::object(), cfg.out_dir, err);
        return estimation_failure;
    }
}

} // namespace mawii::cli
