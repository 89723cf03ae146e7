#pragma once

#include <mawii/cue.hpp>
#include <mawii/data.hpp>
#include <mawii/moments.hpp>
#include <mawii/nuisance.hpp>

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mawii {

enum class Method
{
    genius_mawii,
    two_sls,
    liml,
    ivw,
    divw,
    mr_egger,
    genius_gmm2,
    genius_cue_classical,
};

// Display names: "GENIUS-MAWII", "2SLS", "LIML", "IVW", "dIVW", "MR-Egger",
// "GENIUS-GMM2", "GENIUS-CUE".
std::string method_name(Method m);

// Accepts the display names case-insensitively plus snake_case aliases
// (two_sls, mr_egger, gmm2, cue_classical, ...). Throws input_error.
Method parse_method(const std::string& name);

// Parses a comma-separated list; "all" expands to all_methods().
std::vector<Method> parse_methods(const std::string& list);

const std::vector<Method>& all_methods();

struct ComparatorEstimate
{
    Method method = Method::two_sls;
    double beta = 0;
    double se = 0;
    std::map<std::string, double> extras;
};

nlohmann::json to_json(const ComparatorEstimate& e);

struct SummaryStats
{
    Vector gamma_hat;  // per-SNP exposure association
    Vector Gamma_hat;  // per-SNP outcome association
    Vector se_gamma;
    Vector se_Gamma;
};

// Per-SNP regressions of A and Y on (X, Z_j); coefficient on Z_j with its
// HC0 sandwich standard error.
SummaryStats summarize(const Dataset& d);

// Quantities shared by the k-class estimators: A, Y partialled out on X
// (A_x, Y_x) and on (X, Z) (dA, dY).
struct IvProjections
{
    Vector A_x;
    Vector Y_x;
    Vector dA;
    Vector dY;
    double residual_df = 0;  // n - d_x - 1
};

IvProjections iv_projections(const Dataset& d);
// Reuses the (X, Z) residuals already held by a nuisance fit.
IvProjections iv_projections(const Dataset& d, const NuisanceFit& fit);

// beta(k) = (A_x'Y_x - k dA'dY) / (A_x'A_x - k dA'dA) with the homoscedastic
// k-class standard error.
ComparatorEstimate k_class(const IvProjections& p, double kappa, Method method);

ComparatorEstimate two_sls(const Dataset& d);
ComparatorEstimate two_sls(const IvProjections& p);

// kappa = smallest eigenvalue of (W' M_XZ W)^{-1} (W' M_X W), W = [Y, A].
ComparatorEstimate liml(const Dataset& d);
ComparatorEstimate liml(const IvProjections& p);

// Fixed-effect IVW estimate; the standard error is scaled by the residual
// standard error when that exceeds 1 (multiplicative random effects).
ComparatorEstimate ivw(const SummaryStats& s);

// Debiased IVW without instrument screening. Throws estimation_error when the
// debiased denominator is not positive.
ComparatorEstimate divw(const SummaryStats& s);

// Weighted regression of Gamma on gamma (weights 1/se_Gamma^2) after
// orienting every SNP so that gamma_hat >= 0. Without the intercept this is
// IVW. Needs m >= 3 with the intercept.
ComparatorEstimate mr_egger(const SummaryStats& s, bool with_intercept = true);

// Two-step GMM on the influence-function moments: identity weight, then
// Omega(beta_1)^{-1}.
ComparatorEstimate genius_gmm2(const MomentContext& ctx);
ComparatorEstimate genius_gmm2(const Dataset& d, const NuisanceFit& fit);

// CUE point estimate with the textbook variance (Gbar' Omega^{-1} Gbar)^{-1} / n.
ComparatorEstimate genius_cue_classical(const MomentContext& ctx, const CueSolve& solve);
ComparatorEstimate genius_cue_classical(const Dataset& d, const NuisanceFit& fit, const CueSolve& solve);

// One method's result on one dataset; failures keep the error message.
struct MethodOutcome
{
    Method method = Method::genius_mawii;
    bool ok = false;
    double beta = 0;
    double se = 0;
    std::optional<double> nH;  // GENIUS-MAWII only; kept with beta even when ok is false
    std::map<std::string, double> extras;
    std::vector<std::string> warnings;
    std::string error;
};

nlohmann::json to_json(const MethodOutcome& o);

// Runs the requested methods on one dataset, sharing the nuisance fit and the
// moment cache between the GENIUS-type methods. Errors from one method do not
// stop the others.
std::vector<MethodOutcome> run_methods(const Dataset& d, std::span<const Method> methods,
                                       const OptimizerSettings& settings = {}, double alpha = 0.05);

} // namespace mawii
