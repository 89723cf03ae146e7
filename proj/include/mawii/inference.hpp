#pragma once

#include <mawii/cue.hpp>
#include <mawii/data.hpp>
#include <mawii/moments.hpp>
#include <mawii/nuisance.hpp>

#include <nlohmann/json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mawii {

// Below this n*H the many-weak-moment approximation is not trusted.
inline constexpr double weak_id_threshold = 50.0;

struct CueEstimate
{
    double beta_hat = 0;
    double variance = 0;  // V / n
    double se = 0;
    std::pair<double, double> ci{0, 0};
    double nH = 0;
    double H_hat = 0;
    Vector D_hat;
    bool boundary_flag = false;
    double alpha = 0.05;
    Eigen::Index n = 0;
};

// Sandwich variance under many weak moments:
//   H = d2Q(beta_hat) (analytic), D = Gbar - S Omega^{-1} gbar with
//   S = (1/n) sum G_i g_i', V = D' Omega^{-1} D / H^2, se = sqrt(V / n).
// Throws estimation_error for a boundary solution or H <= 0.
CueEstimate variance_estimate(const MomentContext& ctx, const CueSolve& solve, double alpha = 0.05);

struct WaldTest
{
    double statistic = 0;
    double p_value = 1;
};

WaldTest wald_test(const CueEstimate& est, double beta_star);

double weak_id_measure(const CueEstimate& est);

// Warning text when n*H is below weak_id_threshold.
std::optional<std::string> weak_id_warning(const CueEstimate& est);

nlohmann::json to_json(const CueEstimate& est);

// f(Z_i, X_i) for the residual diagnostic.
using DiagnosticFunction = std::function<Vector(const Dataset&, const NuisanceFit&)>;

// {E(A_i | Z_i, X_i)}^2 from the linear exposure fit; the default.
Vector fitted_exposure_squared(const Dataset& d, const NuisanceFit& fit);

// Lookup by name: "fitted_exposure_sq" (default), "snp_sum_sq" ((sum_j Z_ij)^2).
DiagnosticFunction diagnostic_function(const std::string& name);

struct DiagnosticBin
{
    double f_lo = 0;
    double f_hi = 0;
    double f_center = 0;  // mean of f within the bin
    double mean = 0;      // mean of t_hat within the bin
    double se = 0;
    Eigen::Index count = 0;
};

struct DiagnosticSeries
{
    Vector t_hat;
    Vector f_values;
    std::vector<DiagnosticBin> smoothed;
    double critical_value = 0;  // bin means must lie within +/- this many SEs
    bool centered_flag = false;
};

inline constexpr int diagnostic_bins = 20;

// Residual t_i = dA_i (Y_i - b A_i) - E{dA (Y - b A) | X_i} against f, with
// binned local means over equal-count bins of f. The zero-centering check uses
// a Bonferroni-adjusted normal critical value across bins at family level 5%.
DiagnosticSeries diagnostic_series(const Dataset& d, const NuisanceFit& fit, double beta_hat,
                                   const DiagnosticFunction& f = fitted_exposure_squared,
                                   int bins = diagnostic_bins);

nlohmann::json to_json(const DiagnosticSeries& s, bool with_points = false);

} // namespace mawii
