#include <mawii/simulate.hpp>
#include <mawii/error.hpp>
#include <mawii/rng.hpp>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace mawii {

std::string scenario_name(Scenario s)
{
    switch (s) {
    case Scenario::baseline: return "baseline";
    case Scenario::covariate: return "covariate";
    case Scenario::interact_y: return "interact_y";
    case Scenario::interact_a: return "interact_a";
    case Scenario::custom: return "custom";
    }
    return "?";
}

Scenario parse_scenario(const std::string& name)
{
    std::string key;
    for (char c : name) key += c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (auto s : {Scenario::baseline, Scenario::covariate, Scenario::interact_y, Scenario::interact_a,
                   Scenario::custom}) {
        if (key == scenario_name(s)) return s;
    }
    throw input_error("unknown scenario '" + name + "'", {{"scenario", name}});
}

void SimulationConfig::validate() const
{
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw input_error("gamma must be finite and >= 0", {{"gamma", gamma}});
    if (!std::isfinite(beta0)) throw input_error("beta0 must be finite");
    if (!std::isfinite(direct_effect)) throw input_error("direct_effect must be finite");
    if (n_reps < 1) throw input_error("n_reps must be at least 1", {{"n_reps", n_reps}});
    if (methods.empty()) throw input_error("no methods requested");
    if (workers < 0) throw input_error("workers must be >= 0", {{"workers", workers}});
    if (!(alpha > 0.0 && alpha < 1.0)) throw input_error("alpha must be in (0, 1)", {{"alpha", alpha}});
    optimizer.validate();
    if (scenario == Scenario::custom) {
        if (!genotype_pool || genotype_pool->rows() == 0 || genotype_pool->cols() == 0) {
            throw input_error("custom scenario needs a genotype file");
        }
    } else if (m < 1) {
        throw input_error("m must be at least 1", {{"m", m}});
    }
    const int dx = scenario == Scenario::covariate ? 2 : 1;
    if (n <= snp_count() + dx) throw input_error("n must exceed m + d_x", {{"n", n}, {"m", snp_count()}});
}

int SimulationConfig::snp_count() const
{
    if (scenario == Scenario::custom && genotype_pool) return static_cast<int>(genotype_pool->cols());
    return m;
}

nlohmann::json to_json(const SimulationConfig& c)
{
    nlohmann::json methods = nlohmann::json::array();
    for (auto m : c.methods) methods.push_back(method_name(m));
    return {
        {"scenario", scenario_name(c.scenario)},
        {"m", c.snp_count()},
        {"n", c.n},
        {"gamma", c.gamma},
        {"beta0", c.beta0},
        {"direct_effect", c.direct_effect},
        {"n_reps", c.n_reps},
        {"seed", c.seed},
        {"methods", methods},
        {"bounds", {c.optimizer.lo, c.optimizer.hi}},
        {"grid_points", c.optimizer.grid_points},
        {"alpha", c.alpha},
    };
}

Matrix resample_rows(const Matrix& pool, Eigen::Index n, std::mt19937_64& rng)
{
    if (pool.rows() == 0) throw input_error("cannot resample from an empty genotype pool");
    std::uniform_int_distribution<Eigen::Index> pick(0, pool.rows() - 1);
    Matrix out(n, pool.cols());
    for (Eigen::Index i = 0; i < n; ++i) out.row(i) = pool.row(pick(rng));
    return out;
}

namespace {

// Z in {0, 1, 2} with probabilities 1/4, 1/2, 1/4: the sum of two fair bits.
Matrix draw_genotypes(Eigen::Index n, Eigen::Index m, std::mt19937_64& rng)
{
    Matrix Z(n, m);
    std::uint64_t bits = 0;
    int left = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            if (left == 0) {
                bits = rng();
                left = 32;
            }
            Z(i, j) = std::popcount(bits & 3U);
            bits >>= 2;
            --left;
        }
    }
    return Z;
}

Vector draw_normal(Eigen::Index n, double mean, double sd, std::mt19937_64& rng)
{
    std::normal_distribution<double> dist(mean, sd);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = dist(rng);
    return v;
}

} // namespace

Generated generate(const SimulationConfig& config, std::uint64_t rep)
{
    const Eigen::Index n = config.n;
    auto genotype_rng = make_stream(config.seed, rep, Stream::genotype);
    Matrix Z;
    if (config.scenario == Scenario::custom) {
        auto rng = make_stream(config.seed, rep, Stream::resample);
        Z = resample_rows(*config.genotype_pool, n, rng);
    } else {
        Z = draw_genotypes(n, config.m, genotype_rng);
    }

    auto u_rng = make_stream(config.seed, rep, Stream::confounder);
    auto ea_rng = make_stream(config.seed, rep, Stream::exposure_noise);
    auto ey_rng = make_stream(config.seed, rep, Stream::outcome_noise);

    LatentRecord latent;
    latent.U = draw_normal(n, config.scenario == Scenario::covariate ? 1.0 : 0.0, 1.0, u_rng);
    latent.eps_A = draw_normal(n, 0.0, 1.0, ea_rng);
    latent.eps_Y = draw_normal(n, 0.0, 2.0, ey_rng);
    latent.snp_sum = Z.rowwise().sum();

    const Vector& S = latent.snp_sum;
    const Vector& U = latent.U;
    Vector confounding = U;
    Matrix covariates(n, 0);
    if (config.scenario == Scenario::covariate) {
        auto x_rng = make_stream(config.seed, rep, Stream::covariate);
        covariates = draw_normal(n, 0.0, 1.0, x_rng);
        confounding = U.cwiseProduct(covariates.col(0));
    }

    Vector A = S + confounding + config.gamma * S.cwiseProduct(latent.eps_A);
    Vector Y_direct = config.direct_effect * S + 2.0 * confounding + latent.eps_Y;

    if (config.scenario == Scenario::interact_y || config.scenario == Scenario::interact_a) {
        const auto k = static_cast<Eigen::Index>(std::floor(0.2 * static_cast<double>(Z.cols()) + 1e-9));
        const Vector interaction = Z.leftCols(k).rowwise().sum().cwiseProduct(U);
        if (config.scenario == Scenario::interact_y) {
            Y_direct += interaction;
        } else {
            A += interaction;
        }
    }
    Vector Y = config.beta0 * A + Y_direct;

    return {Dataset::with_intercept(std::move(Z), covariates, std::move(A), std::move(Y)), std::move(latent)};
}

double ols_bias_reference(double gamma, int m, double beta0)
{
    if (std::isinf(gamma)) return beta0;
    const double k = gamma * gamma * m * (0.5 + m);
    return (beta0 + 2.0 + beta0 * k) / (1.0 + k);
}

const MethodRow& SimulationReport::row(Method m) const
{
    for (const auto& r : rows) {
        if (r.method == m) return r;
    }
    throw input_error("method not in report: " + method_name(m));
}

std::vector<MethodRow> aggregate(const SimulationConfig& config, const std::vector<RepRecord>& reps)
{
    const double z = normal_quantile(1.0 - config.alpha / 2.0);
    std::vector<MethodRow> rows;
    for (std::size_t k = 0; k < config.methods.size(); ++k) {
        MethodRow row;
        row.method = config.methods[k];
        std::vector<double> beta;
        std::vector<double> se;
        std::vector<double> covered;
        std::vector<double> nH;
        for (const auto& rec : reps) {
            const auto& o = rec.outcomes.at(k);
            if (!o.ok) {
                ++row.failures;
                continue;
            }
            beta.push_back(o.beta);
            se.push_back(o.se);
            covered.push_back(std::abs(o.beta - config.beta0) <= z * o.se ? 1.0 : 0.0);
            if (o.nH) nH.push_back(*o.nH);
        }
        row.n_ok = static_cast<int>(beta.size());
        if (row.n_ok > 0) {
            row.mean = mean(beta);
            row.mean_se = mean(se);
            row.coverage = mean(covered);
            row.coverage_mcse = std::sqrt(row.coverage * (1.0 - row.coverage) / row.n_ok);
        } else {
            row.mean = row.mean_se = row.coverage = std::nan("");
        }
        if (row.n_ok >= 2) row.sd = sample_sd(beta);
        if (!nH.empty()) row.mean_nH = mean(nH);
        rows.push_back(row);
    }
    return rows;
}

SimulationReport run_monte_carlo(const SimulationConfig& config, const ProgressCallback& progress)
{
    config.validate();
    const int total = config.n_reps;
    std::vector<RepRecord> reps(static_cast<std::size_t>(total));

    std::atomic<int> next{0};
    std::atomic<int> done{0};
    std::mutex progress_mutex;
    auto work = [&] {
        for (int r = next++; r < total; r = next++) {
            RepRecord rec;
            rec.rep = static_cast<std::uint64_t>(r);
            try {
                const auto gen = generate(config, rec.rep);
                rec.outcomes = run_methods(gen.data, config.methods, config.optimizer, config.alpha);
            } catch (const std::exception& e) {
                rec.outcomes.clear();
                for (auto m : config.methods) {
                    MethodOutcome o;
                    o.method = m;
                    o.error = e.what();
                    rec.outcomes.push_back(std::move(o));
                }
            }
            reps[static_cast<std::size_t>(r)] = std::move(rec);
            const int finished = ++done;
            if (progress) {
                const std::lock_guard lock(progress_mutex);
                progress(finished, total);
            }
        }
    };

    int workers = config.workers > 0 ? config.workers : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::clamp(workers, 1, total);
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    }

    SimulationReport report;
    report.config = config;
    report.rows = aggregate(config, reps);
    report.reps = std::move(reps);
    return report;
}

std::pair<double, double> SweepResult::band_at(double nH) const
{
    const double half = 2.0 * std::exp(se_curve.first + se_curve.second * std::log(nH));
    return {beta0 - half, beta0 + half};
}

double SweepResult::inside_fraction(double nH_cut, bool above) const
{
    int total = 0;
    int inside = 0;
    for (const auto& r : rows) {
        if (!r.nH || (*r.nH > nH_cut) != above) continue;
        ++total;
        if (r.inside_band) ++inside;
    }
    return total > 0 ? static_cast<double>(inside) / total : std::nan("");
}

SweepResult weak_id_sweep(const std::vector<double>& gammas, const SimulationConfig& base,
                          const ProgressCallback& progress)
{
    if (gammas.empty()) throw input_error("sweep needs at least one gamma");
    SweepResult out;
    out.beta0 = base.beta0;
    const int total = static_cast<int>(gammas.size()) * base.n_reps;
    for (std::size_t g = 0; g < gammas.size(); ++g) {
        auto config = base;
        config.gamma = gammas[g];
        config.methods = {Method::genius_mawii};
        const int offset = static_cast<int>(g) * base.n_reps;
        ProgressCallback inner;
        if (progress) inner = [&](int done, int) { progress(offset + done, total); };
        auto report = run_monte_carlo(config, inner);
        for (const auto& rec : report.reps) {
            const auto& o = rec.outcomes.front();
            SweepRow row;
            row.gamma = config.gamma;
            row.rep = rec.rep;
            row.beta_hat = o.beta;
            row.nH = o.nH;
            if (o.ok) {
                row.se = o.se;
                row.inside_band = std::abs(o.beta - config.beta0) <= 2.0 * o.se;
            }
            out.rows.push_back(row);
        }
        out.reports.push_back(std::move(report));
    }

    std::vector<double> lx;
    std::vector<double> ly;
    for (const auto& r : out.rows) {
        if (r.se && r.nH && *r.se > 0 && *r.nH > 0) {
            lx.push_back(std::log(*r.nH));
            ly.push_back(std::log(*r.se));
        }
    }
    if (lx.size() >= 2) {
        const double mx = mean(lx);
        const double my = mean(ly);
        double sxy = 0;
        double sxx = 0;
        for (std::size_t k = 0; k < lx.size(); ++k) {
            sxy += (lx[k] - mx) * (ly[k] - my);
            sxx += (lx[k] - mx) * (lx[k] - mx);
        }
        if (sxx > 0) out.se_curve = {my - sxy / sxx * mx, sxy / sxx};
    }
    return out;
}

} // namespace mawii
