#pragma once

#include <mawii/comparators.hpp>
#include <mawii/cue.hpp>
#include <mawii/data.hpp>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace mawii {

enum class Scenario
{
    baseline,
    covariate,     // U ~ N(1, 1), one covariate X ~ N(0, 1) interacting with U
    interact_y,    // first 20% of SNPs interact with U in the outcome
    interact_a,    // first 20% of SNPs interact with U in the exposure
    custom,        // genotypes resampled from a user matrix, baseline outcome model
};

std::string scenario_name(Scenario s);
Scenario parse_scenario(const std::string& name);

struct SimulationConfig
{
    Scenario scenario = Scenario::baseline;
    int m = 100;
    int n = 10000;
    double gamma = 0.1;
    double beta0 = 0.4;
    double direct_effect = 1.0;  // coefficient on sum_j Z_ij in the outcome
    int n_reps = 200;
    std::uint64_t seed = 20240601;
    std::vector<Method> methods = all_methods();
    OptimizerSettings optimizer;
    double alpha = 0.05;
    int workers = 0;  // 0: hardware concurrency
    // Genotype pool for Scenario::custom; m is taken from its column count.
    std::shared_ptr<const Matrix> genotype_pool;

    // Throws input_error.
    void validate() const;
    int snp_count() const;
};

nlohmann::json to_json(const SimulationConfig& c);

// Unobserved draws behind one generated dataset.
struct LatentRecord
{
    Vector U;
    Vector eps_A;
    Vector eps_Y;
    Vector snp_sum;  // sum_j Z_ij
};

struct Generated
{
    Dataset data;
    LatentRecord latent;
};

// Draws replicate `rep`. Each variable has its own stream keyed by
// (seed, rep, variable), so any replicate can be produced on its own.
Generated generate(const SimulationConfig& config, std::uint64_t rep);

// n rows drawn with replacement from `pool`.
Matrix resample_rows(const Matrix& pool, Eigen::Index n, std::mt19937_64& rng);

// Probability limit of OLS of Y on A in the baseline design:
// (beta0 + 2 + beta0 g^2 m (0.5 + m)) / (1 + g^2 m (0.5 + m)); beta0 when gamma is infinite.
double ols_bias_reference(double gamma, int m, double beta0);

struct RepRecord
{
    std::uint64_t rep = 0;
    std::vector<MethodOutcome> outcomes;  // same order as config.methods
};

struct MethodRow
{
    Method method = Method::genius_mawii;
    int n_ok = 0;
    int failures = 0;
    double mean = 0;
    std::optional<double> sd;  // absent with fewer than two successful reps
    double mean_se = 0;
    double coverage = 0;
    double coverage_mcse = 0;
    std::optional<double> mean_nH;
};

struct SimulationReport
{
    SimulationConfig config;
    std::vector<MethodRow> rows;  // one per method, config order
    std::vector<RepRecord> reps;  // rep order

    const MethodRow& row(Method m) const;
};

using ProgressCallback = std::function<void(int done, int total)>;

// Generates and estimates every replicate (concurrently, up to
// config.workers threads) and aggregates per method. Output does not depend
// on the worker count.
SimulationReport run_monte_carlo(const SimulationConfig& config, const ProgressCallback& progress = {});

// Aggregates a set of replicate records; exposed for testing.
std::vector<MethodRow> aggregate(const SimulationConfig& config, const std::vector<RepRecord>& reps);

nlohmann::json to_json(const SimulationReport& r, bool with_reps = false);

// Aligned text table: Method, Mean, SD, SE, CP, followed by nH and failure notes.
std::string format_table(const SimulationReport& r);

struct SweepRow
{
    double gamma = 0;
    std::uint64_t rep = 0;
    double beta_hat = 0;
    std::optional<double> se;  // absent when no variance could be formed
    std::optional<double> nH;
    bool inside_band = false;  // |beta_hat - beta0| <= 2 se
};

struct SweepResult
{
    double beta0 = 0;
    std::vector<SweepRow> rows;               // gammas x reps, gamma-major
    std::vector<SimulationReport> reports;    // one per gamma
    // log se = first + second * log nH, least squares over rows with both;
    // (0, -0.5) when there are too few.
    std::pair<double, double> se_curve{0.0, -0.5};

    // beta0 +/- 2 se(nH) from se_curve; the shaded band in the sweep plot.
    std::pair<double, double> band_at(double nH) const;

    // Fraction of rows with inside_band among those with nH above / below cut.
    double inside_fraction(double nH_cut, bool above) const;
};

// GENIUS-MAWII Monte Carlo for each gamma with the rest of `base` fixed.
SweepResult weak_id_sweep(const std::vector<double>& gammas, const SimulationConfig& base,
                          const ProgressCallback& progress = {});

nlohmann::json to_json(const SweepResult& s);

// gamma,rep,beta_hat,se,nH,inside_band (empty cells for absent values).
std::string format_csv(const SweepResult& s);

} // namespace mawii
