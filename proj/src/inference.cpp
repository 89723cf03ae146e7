#include <mawii/inference.hpp>
#include <mawii/error.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mawii {

CueEstimate variance_estimate(const MomentContext& ctx, const CueSolve& solve, double alpha)
{
    if (solve.boundary_flag) {
        throw estimation_error("CUE solution lies on the optimizer boundary; variance not available",
                               {{"beta_hat", solve.beta_hat}});
    }
    if (!(alpha > 0.0 && alpha < 1.0)) throw input_error("alpha must be in (0, 1)", {{"alpha", alpha}});

    const double beta = solve.beta_hat;
    const auto obj = ctx.objective(beta);
    if (!(obj.d2Q > 0.0)) {
        throw estimation_error("unreliable curvature: second derivative of the CUE objective is not positive",
                               {{"beta_hat", beta}, {"d2Q", obj.d2Q}});
    }
    const SpdSolver solver(ctx.omega(beta));
    const Vector g = ctx.gbar(beta);
    const Vector D = ctx.G_mean() - ctx.cross(beta) * solver.solve(g);
    const double middle = D.dot(solver.solve(D));
    const double n = static_cast<double>(ctx.n());

    CueEstimate est;
    est.beta_hat = beta;
    est.H_hat = obj.d2Q;
    est.nH = n * obj.d2Q;
    est.D_hat = D;
    est.variance = middle / (obj.d2Q * obj.d2Q) / n;
    est.se = std::sqrt(std::max(est.variance, 0.0));
    est.alpha = alpha;
    est.n = ctx.n();
    est.boundary_flag = false;
    const double z = normal_quantile(1.0 - alpha / 2.0);
    est.ci = {beta - z * est.se, beta + z * est.se};
    return est;
}

WaldTest wald_test(const CueEstimate& est, double beta_star)
{
    if (!(est.se > 0.0)) throw estimation_error("Wald test needs a positive standard error", {{"se", est.se}});
    WaldTest out;
    out.statistic = (est.beta_hat - beta_star) / est.se;
    out.p_value = 2.0 * normal_cdf(-std::abs(out.statistic));
    return out;
}

double weak_id_measure(const CueEstimate& est)
{
    return est.nH;
}

std::optional<std::string> weak_id_warning(const CueEstimate& est)
{
    if (est.nH >= weak_id_threshold) return std::nullopt;
    return "weak identification: nH = " + std::to_string(est.nH) + " is below " +
           std::to_string(static_cast<int>(weak_id_threshold)) + "; estimate and interval may be unreliable";
}

nlohmann::json to_json(const CueEstimate& est)
{
    return {
        {"beta_hat", est.beta_hat},
        {"se", est.se},
        {"variance", est.variance},
        {"ci", {est.ci.first, est.ci.second}},
        {"alpha", est.alpha},
        {"nH", est.nH},
        {"H_hat", est.H_hat},
        {"boundary_flag", est.boundary_flag},
        {"n", est.n},
    };
}

Vector fitted_exposure_squared(const Dataset& d, const NuisanceFit& fit)
{
    const Vector fitted = d.A() - fit.delta_A;
    return fitted.cwiseAbs2();
}

DiagnosticFunction diagnostic_function(const std::string& name)
{
    if (name.empty() || name == "fitted_exposure_sq") return fitted_exposure_squared;
    if (name == "snp_sum_sq") {
        return [](const Dataset& d, const NuisanceFit&) -> Vector { return d.Z().rowwise().sum().cwiseAbs2(); };
    }
    throw input_error("unknown diagnostic function '" + name + "'", {{"f", name}});
}

DiagnosticSeries diagnostic_series(const Dataset& d, const NuisanceFit& fit, double beta_hat,
                                   const DiagnosticFunction& f, int bins)
{
    const auto n = d.n();
    if (fit.delta_A.size() != n) throw input_error("nuisance fit does not match dataset");
    if (bins < 2 || n < 2 * bins) throw input_error("too few observations for the diagnostic bins", {{"n", n}});

    Matrix targets(n, 2);
    targets.col(0) = fit.delta_A.cwiseProduct(d.Y());
    targets.col(1) = fit.delta_A.cwiseProduct(d.A());
    Matrix cond(n, 2);
    if (d.d_x() == 1) {
        cond.col(0).setConstant(targets.col(0).mean());
        cond.col(1).setConstant(targets.col(1).mean());
    } else {
        if (!fit.bandwidth) throw input_error("nuisance fit with covariates lacks a kernel bandwidth");
        cond = kernel_regress(targets, d.X(), *fit.bandwidth);
    }

    DiagnosticSeries s;
    s.t_hat = (targets.col(0) - cond.col(0)) - beta_hat * (targets.col(1) - cond.col(1));
    s.f_values = f(d, fit);
    if (s.f_values.size() != n) throw input_error("diagnostic function returned the wrong length");
    if (!(s.f_values.maxCoeff() > s.f_values.minCoeff())) {
        throw input_error("diagnostic function is constant; nothing to plot against");
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return s.f_values(a) < s.f_values(b); });

    s.critical_value = normal_quantile(1.0 - 0.05 / (2.0 * bins));
    s.centered_flag = true;
    for (int b = 0; b < bins; ++b) {
        const auto lo = static_cast<std::size_t>(n * b / bins);
        const auto hi = static_cast<std::size_t>(n * (b + 1) / bins);
        std::vector<double> tv;
        std::vector<double> fv;
        for (auto r = lo; r < hi; ++r) {
            tv.push_back(s.t_hat(order[r]));
            fv.push_back(s.f_values(order[r]));
        }
        DiagnosticBin bin;
        bin.count = static_cast<Eigen::Index>(tv.size());
        bin.f_lo = fv.front();
        bin.f_hi = fv.back();
        bin.f_center = mean(fv);
        bin.mean = mean(tv);
        bin.se = sample_sd(tv) / std::sqrt(static_cast<double>(tv.size()));
        if (std::abs(bin.mean) > s.critical_value * bin.se) s.centered_flag = false;
        s.smoothed.push_back(bin);
    }
    return s;
}

nlohmann::json to_json(const DiagnosticSeries& s, bool with_points)
{
    nlohmann::json bins = nlohmann::json::array();
    for (const auto& b : s.smoothed) {
        bins.push_back({{"f_lo", b.f_lo}, {"f_hi", b.f_hi}, {"f_center", b.f_center}, {"mean", b.mean},
                        {"se", b.se}, {"count", b.count}});
    }
    nlohmann::json out = {
        {"centered_flag", s.centered_flag},
        {"critical_value", s.critical_value},
        {"bins", bins},
        {"n", s.t_hat.size()},
    };
    if (with_points) {
        out["t_hat"] = std::vector<double>(s.t_hat.begin(), s.t_hat.end());
        out["f"] = std::vector<double>(s.f_values.begin(), s.f_values.end());
    }
    return out;
}

} // namespace mawii
