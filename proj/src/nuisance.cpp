#include <mawii/nuisance.hpp>
#include <mawii/error.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mawii {

namespace {

constexpr double epanechnikov_peak = 0.75;
constexpr std::size_t grid_size = 25;

double kernel_weight(const Matrix& X, Eigen::Index i, Eigen::Index j, double sigma)
{
    double w = 1.0;
    for (Eigen::Index k = 1; k < X.cols(); ++k) {
        const double u = (X(i, k) - X(j, k)) / sigma;
        if (std::abs(u) >= 1.0) return 0.0;
        w *= epanechnikov_peak * (1.0 - u * u);
    }
    return w;
}

double self_weight(Eigen::Index d_cov)
{
    return std::pow(epanechnikov_peak, static_cast<double>(d_cov));
}

// Single covariate: window sums of 1, x, x^2 (and t-weighted versions) from
// prefix sums over the sorted sample.
std::vector<double> loo_errors_sorted_1d(const Vector& targets, const Vector& x_raw, const std::vector<double>& grid)
{
    const auto n = x_raw.size();
    const double center = x_raw.mean();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x_raw(a) < x_raw(b); });

    std::vector<double> xs(order.size());
    std::vector<long double> p0(order.size() + 1, 0), p1(p0), p2(p0), q0(p0), q1(p0), q2(p0);
    for (std::size_t r = 0; r < order.size(); ++r) {
        const long double x = x_raw(order[r]) - center;
        const long double t = targets(order[r]);
        xs[r] = static_cast<double>(x);
        p0[r + 1] = p0[r] + 1;
        p1[r + 1] = p1[r] + x;
        p2[r + 1] = p2[r] + x * x;
        q0[r + 1] = q0[r] + t;
        q1[r + 1] = q1[r] + t * x;
        q2[r + 1] = q2[r] + t * x * x;
    }

    std::vector<double> errors;
    errors.reserve(grid.size());
    for (double sigma : grid) {
        const long double s2 = static_cast<long double>(sigma) * sigma;
        long double sse = 0;
        bool empty = false;
        for (std::size_t r = 0; r < xs.size() && !empty; ++r) {
            const long double x = xs[r];
            const auto lo = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), xs[r] - sigma) - xs.begin());
            const auto hi = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), xs[r] + sigma) - xs.begin());
            auto quad = [&](const std::vector<long double>& a, const std::vector<long double>& b,
                            const std::vector<long double>& c) {
                const long double s0 = a[hi] - a[lo];
                const long double s1 = b[hi] - b[lo];
                const long double sq = c[hi] - c[lo];
                return epanechnikov_peak * (s0 - (x * x * s0 - 2 * x * s1 + sq) / s2);
            };
            const long double t = targets(order[r]);
            const long double den = quad(p0, p1, p2) - epanechnikov_peak;
            const long double num = quad(q0, q1, q2) - epanechnikov_peak * t;
            if (den <= 1e-12L) {
                empty = true;
                break;
            }
            const long double resid = t - num / den;
            sse += resid * resid;
        }
        errors.push_back(empty ? std::numeric_limits<double>::infinity()
                               : static_cast<double>(sse / static_cast<long double>(n)));
    }
    return errors;
}

// General case: exact product-kernel sums, restricted to the window of the
// first covariate (the kernel vanishes outside it).
std::vector<double> loo_errors_windowed(const Vector& targets, const Matrix& X, const std::vector<double>& grid)
{
    const auto n = X.rows();
    const double k0 = self_weight(X.cols() - 1);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return X(a, 1) < X(b, 1); });
    std::vector<double> first(order.size());
    for (std::size_t r = 0; r < order.size(); ++r) first[r] = X(order[r], 1);

    std::vector<double> errors;
    errors.reserve(grid.size());
    for (double sigma : grid) {
        double sse = 0;
        bool empty = false;
        for (std::size_t r = 0; r < order.size() && !empty; ++r) {
            const auto i = order[r];
            const auto lo = std::lower_bound(first.begin(), first.end(), first[r] - sigma) - first.begin();
            const auto hi = std::upper_bound(first.begin(), first.end(), first[r] + sigma) - first.begin();
            double num = 0;
            double den = 0;
            for (auto q = lo; q < hi; ++q) {
                const auto j = order[static_cast<std::size_t>(q)];
                if (j == i) continue;
                const double w = kernel_weight(X, i, j, sigma);
                num += w * targets(j);
                den += w;
            }
            if (den <= 1e-12 * k0) {
                empty = true;
                break;
            }
            const double resid = targets(i) - num / den;
            sse += resid * resid;
        }
        errors.push_back(empty ? std::numeric_limits<double>::infinity() : sse / static_cast<double>(n));
    }
    return errors;
}

} // namespace

LinearNuisance fit_linear_nuisance(const Dataset& d)
{
    LinearNuisance out;
    if (d.d_x() == 1) {
        out.Pi = d.Z().colwise().mean();
    } else {
        const LeastSquares on_x(d.X(), d.covariate_names());
        out.Pi = on_x.coefficients(d.Z());
    }
    const LeastSquares on_xz(d.full_design(), d.full_design_names());
    Matrix rhs(d.n(), 2);
    rhs.col(0) = d.A();
    rhs.col(1) = d.Y();
    const Matrix coef = on_xz.coefficients(rhs);
    const Matrix resid = on_xz.residuals(rhs);
    out.mu = coef.col(0);
    out.lambda = coef.col(1);
    out.delta_A = resid.col(0);
    out.delta_Y = resid.col(1);
    return out;
}

Matrix kernel_regress(const Matrix& targets, const Matrix& X, double sigma)
{
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw input_error("kernel bandwidth must be positive and finite", {{"sigma", sigma}});
    }
    if (targets.rows() != X.rows()) throw input_error("kernel targets and covariates differ in length");
    const auto n = X.rows();
    const auto k = targets.cols();
    Matrix fitted(n, k);
    Vector num(k);
    for (Eigen::Index i = 0; i < n; ++i) {
        num.setZero();
        double den = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double w = kernel_weight(X, i, j, sigma);
            if (w > 0.0) {
                for (Eigen::Index c = 0; c < k; ++c) num(c) += w * targets(j, c);
                den += w;
            }
        }
        if (!(den > 0.0)) {
            throw input_error("empty kernel neighborhood at observation " + std::to_string(i + 1),
                              {{"row", i + 1}, {"sigma", sigma}});
        }
        fitted.row(i) = (num / den).transpose();
    }
    return fitted;
}

Vector kernel_regress(const Vector& targets, const Matrix& X, double sigma)
{
    Matrix t = targets;
    return kernel_regress(t, X, sigma).col(0);
}

std::vector<double> bandwidth_grid(const Matrix& X)
{
    if (X.cols() < 2) throw input_error("bandwidth selection needs at least one non-intercept covariate");
    double lo_sd = std::numeric_limits<double>::infinity();
    double hi_sd = 0.0;
    const double n = static_cast<double>(X.rows());
    for (Eigen::Index k = 1; k < X.cols(); ++k) {
        const double sd = std::sqrt((X.col(k).array() - X.col(k).mean()).square().sum() / (n - 1.0));
        lo_sd = std::min(lo_sd, sd);
        hi_sd = std::max(hi_sd, sd);
    }
    if (!(lo_sd > 0.0)) throw input_error("constant covariate column; cannot scale kernel bandwidth");
    const double lo = std::log(0.1 * lo_sd);
    const double hi = std::log(3.0 * hi_sd);
    std::vector<double> grid(grid_size);
    for (std::size_t g = 0; g < grid_size; ++g) {
        grid[g] = std::exp(lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid_size - 1));
    }
    return grid;
}

std::vector<double> loo_errors(const Vector& targets, const Matrix& X, const std::vector<double>& grid)
{
    if (X.cols() < 2) throw input_error("leave-one-out bandwidth selection needs a non-intercept covariate");
    if (targets.size() != X.rows()) throw input_error("targets and covariates differ in length");
    if (X.cols() == 2) return loo_errors_sorted_1d(targets, X.col(1), grid);
    return loo_errors_windowed(targets, X, grid);
}

double select_bandwidth(const Vector& targets, const Matrix& X)
{
    if (X.cols() < 2) throw input_error("bandwidth selection needs d_x >= 2");
    if (X.rows() < 20) throw input_error("bandwidth selection needs n >= 20", {{"n", X.rows()}});
    const auto grid = bandwidth_grid(X);
    const auto err = loo_errors(targets, X, grid);
    const double best = *std::min_element(err.begin(), err.end());
    if (!std::isfinite(best)) {
        throw input_error("every candidate bandwidth leaves some observation with an empty kernel neighborhood; "
                          "use a larger bandwidth grid",
                          {{"grid_max", grid.back()}});
    }
    const double tol = 1e-12 * targets.squaredNorm() / static_cast<double>(targets.size());
    const auto mid = static_cast<double>(grid.size() - 1) / 2.0;
    std::size_t chosen = 0;
    double chosen_dist = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < grid.size(); ++g) {
        if (err[g] <= best + tol) {
            const double dist = std::abs(static_cast<double>(g) - mid);
            if (dist < chosen_dist) {
                chosen = g;
                chosen_dist = dist;
            }
        }
    }
    return grid[chosen];
}

NuisanceFit fit_nuisance(const Dataset& d)
{
    auto lin = fit_linear_nuisance(d);
    NuisanceFit fit;
    fit.Pi = std::move(lin.Pi);
    fit.mu = std::move(lin.mu);
    fit.lambda = std::move(lin.lambda);
    fit.delta_A = std::move(lin.delta_A);
    fit.delta_Y = std::move(lin.delta_Y);

    const auto n = d.n();
    Matrix targets(n, 2);
    targets.col(0) = fit.delta_A.cwiseProduct(fit.delta_Y);
    targets.col(1) = fit.delta_A.cwiseAbs2();
    if (d.d_x() == 1) {
        fit.omega_at_sample = Vector::Constant(n, targets.col(0).mean());
        fit.theta_at_sample = Vector::Constant(n, targets.col(1).mean());
        return fit;
    }
    const double sigma = select_bandwidth(targets.col(1), d.X());
    const Matrix fitted = kernel_regress(targets, d.X(), sigma);
    fit.omega_at_sample = fitted.col(0);
    fit.theta_at_sample = fitted.col(1);
    fit.bandwidth = sigma;
    return fit;
}

nlohmann::json to_json(const NuisanceFit& fit)
{
    auto vec = [](const Vector& v) { return std::vector<double>(v.begin(), v.end()); };
    nlohmann::json pi = nlohmann::json::array();
    for (Eigen::Index j = 0; j < fit.Pi.cols(); ++j) pi.push_back(vec(fit.Pi.col(j)));
    nlohmann::json out = {
        {"Pi", pi},
        {"mu", vec(fit.mu)},
        {"lambda", vec(fit.lambda)},
        {"delta_A", vec(fit.delta_A)},
        {"delta_Y", vec(fit.delta_Y)},
        {"omega_at_sample", vec(fit.omega_at_sample)},
        {"theta_at_sample", vec(fit.theta_at_sample)},
    };
    out["bandwidth"] = fit.bandwidth ? nlohmann::json(*fit.bandwidth) : nlohmann::json(nullptr);
    return out;
}

} // namespace mawii
