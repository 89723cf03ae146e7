#include "support.hpp"

#include <mawii/error.hpp>
#include <mawii/moments.hpp>
#include <mawii/nuisance.hpp>
#include <mawii/simulate.hpp>

#include <doctest.h>

#include <random>

using namespace mawii;

namespace {

Dataset five_rows()
{
    Matrix Z(5, 2);
    Z << 0, 1,
         1, 2,
         2, 1,
         1, 0,
         2, 2;
    Vector A(5);
    A << 0.4, 2.1, 3.3, 0.9, 4.6;
    Vector Y(5);
    Y << 1.2, 0.7, 2.8, -0.3, 2.2;
    return Dataset::with_intercept(Z, Matrix(5, 0), A, Y);
}

} // namespace

TEST_CASE("influence values match the per-element formula on a 5 x 2 dataset")
{
    const auto d = five_rows();
    const auto fit = fit_nuisance(d);
    for (double beta : {-1.3, 0.0, 0.4, 2.0}) {
        const Matrix g = influence_values(d, fit, beta);
        const Matrix G = moment_derivative_values(d, fit);
        for (int i = 0; i < 5; ++i) {
            const double da = fit.delta_A(i);
            const double dy = fit.delta_Y(i);
            const double delta = da * dy - beta * da * da;
            const double cond = fit.omega_at_sample(i) - beta * fit.theta_at_sample(i);
            for (int j = 0; j < 2; ++j) {
                const double zc = d.Z()(i, j) - fit.Pi(0, j);
                CHECK(g(i, j) == doctest::Approx(zc * (delta - cond)).epsilon(1e-13).scale(1e-12));
                CHECK(G(i, j) == doctest::Approx(zc * (fit.theta_at_sample(i) - da * da)).epsilon(1e-13).scale(1e-12));
            }
        }
    }
}

TEST_CASE("zero exposure residuals give zero moment rows")
{
    const auto d = five_rows();
    auto fit = fit_nuisance(d);
    fit.delta_A.setZero();
    fit.omega_at_sample.setZero();
    fit.theta_at_sample.setZero();
    CHECK(influence_values(d, fit, 0.7).isZero(0.0));
    CHECK(moment_derivative_values(d, fit).isZero(0.0));
}

TEST_CASE("theta equal to the squared residual makes the derivative vanish")
{
    const auto d = test::baseline_data(4, 100, 0.1, 3);
    auto fit = fit_nuisance(d);
    fit.theta_at_sample = fit.delta_A.cwiseAbs2();
    CHECK(moment_derivative_values(d, fit).isZero(0.0));
}

TEST_CASE("moments are linear in beta")
{
    const auto d = test::baseline_data(12, 2000, 0.1, 5);
    const auto fit = fit_nuisance(d);
    const MomentContext ctx(d, fit);
    const Matrix g0 = influence_values(d, fit, 0.0);
    const Matrix G = moment_derivative_values(d, fit);
    CHECK(G == ctx.Gmat());
    CHECK(g0 == ctx.g0());
    for (double beta : {-3.0, 0.4, 1.7}) {
        const Matrix gb = influence_values(d, fit, beta);
        CHECK(gb == Matrix(g0 + beta * G));
        CHECK(ctx.state(beta).g == gb);
    }
    const Matrix g1 = influence_values(d, fit, 0.3);
    const Matrix g2 = influence_values(d, fit, 1.9);
    const Matrix diff = g2 - g1 - 1.6 * G;
    CHECK(diff.cwiseAbs().maxCoeff() <= 1e-10 * g2.cwiseAbs().maxCoeff());

    // central difference with h = 1e-4
    const double h = 1e-4;
    const Matrix fd = (influence_values(d, fit, 0.5 + h) - influence_values(d, fit, 0.5 - h)) / (2 * h);
    CHECK((fd - G).cwiseAbs().maxCoeff() <= 1e-6 * G.cwiseAbs().maxCoeff());
}

TEST_CASE("analytic dQ and d2Q agree with finite differences at 20 random beta")
{
    const auto d = test::baseline_data(20, 3000, 0.1, 7);
    const auto fit = fit_nuisance(d);
    const MomentContext ctx(d, fit);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unif(-3.0, 3.0);
    for (int k = 0; k < 20; ++k) {
        const double b = unif(rng);
        const auto o = cue_objective(ctx, b);
        const double h1 = 1e-5 * std::max(1.0, std::abs(b));
        const double fd1 = (cue_objective(ctx, b + h1).Q - cue_objective(ctx, b - h1).Q) / (2 * h1);
        CHECK(test::rel_err(o.dQ, fd1) < 1e-6);
        const double h2 = 1e-4 * std::max(1.0, std::abs(b));
        const double fd2 = (cue_objective(ctx, b + h2).dQ - cue_objective(ctx, b - h2).dQ) / (2 * h2);
        const double sd2 =
            (cue_objective(ctx, b + h2).Q - 2 * o.Q + cue_objective(ctx, b - h2).Q) / (h2 * h2);
        CHECK(test::rel_err(o.d2Q, fd2) < 1e-5);
        CHECK(test::rel_err(o.d2Q, sd2) < 1e-4);
    }
}

TEST_CASE("objective value and weighting matrix are consistent with the state")
{
    const auto d = test::baseline_data(15, 2000, 0.1, 11);
    const auto fit = fit_nuisance(d);
    const MomentContext ctx(d, fit);
    const auto st = ctx.state(0.25);
    const Vector gbar = st.g.colwise().mean();
    CHECK((gbar - st.gbar).cwiseAbs().maxCoeff() < 1e-12 * st.g.cwiseAbs().maxCoeff());
    const Matrix omega = st.g.transpose() * st.g / static_cast<double>(d.n());
    CHECK((omega - st.Omega).cwiseAbs().maxCoeff() < 1e-10 * omega.cwiseAbs().maxCoeff());
    CHECK(st.Omega.isApprox(st.Omega.transpose(), 0.0));
    const double q = 0.5 * gbar.dot(omega.ldlt().solve(gbar));
    CHECK(st.Q == doctest::Approx(q).epsilon(1e-8));
    const Eigen::SelfAdjointEigenSolver<Matrix> es(st.Omega);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("exactly solvable moments reach Q = 0")
{
    // m = 1: gbar(beta) is a line with a single root.
    const auto d = test::baseline_data(1, 500, 0.3, 13);
    const auto fit = fit_nuisance(d);
    const MomentContext ctx(d, fit);
    const double root = -ctx.g0_mean()(0) / ctx.G_mean()(0);
    const auto at = cue_objective(ctx, root);
    CHECK(at.Q < 1e-25);
    for (double off : {-1.0, -0.01, 0.01, 1.0}) CHECK(cue_objective(ctx, root + off).Q > at.Q);
}

TEST_CASE("singular weighting matrix is reported as ill-conditioned")
{
    auto base = test::baseline_data(3, 200, 0.1, 17);
    Matrix Z = base.Z();
    Z.col(2) = Z.col(0);
    const Dataset d(Z, base.X(), base.A(), base.Y());
    NuisanceFit fit = fit_nuisance(base);  // fit on the full-rank data
    fit.Pi = d.Z().colwise().mean();
    const MomentContext ctx(d, fit);
    try {
        cue_objective(ctx, 0.4);
        FAIL("expected estimation_error");
    } catch (const estimation_error& e) {
        CHECK(std::string(e.what()).find("ill-conditioned") != std::string::npos);
    }
}

TEST_CASE("rescaling Y rescales the moments")
{
    const auto d = test::baseline_data(6, 1000, 0.1, 19);
    const double c = 3.5;
    const Dataset scaled(d.Z(), d.X(), d.A(), c * d.Y());
    const auto fit = fit_nuisance(d);
    const auto fit_c = fit_nuisance(scaled);
    for (double beta : {-0.5, 0.4, 2.0}) {
        const Matrix g = influence_values(d, fit, beta);
        const Matrix gc = influence_values(scaled, fit_c, c * beta);
        CHECK((gc - c * g).cwiseAbs().maxCoeff() < 1e-9 * gc.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("moment dimension mismatch is rejected")
{
    const auto d = five_rows();
    auto fit = fit_nuisance(d);
    fit.delta_A.conservativeResize(4);
    CHECK_THROWS_AS(influence_values(d, fit, 0.1), input_error);
    CHECK_THROWS_AS(moment_derivative_values(d, fit), input_error);
}

TEST_CASE("baseline moments: mean zero at beta0 and negative mean derivative")
{
    const auto d = test::baseline_data(100, 10000, 0.1, 23);
    const auto fit = fit_nuisance(d);
    const Matrix g = influence_values(d, fit, 0.4);
    const double root_n = std::sqrt(static_cast<double>(d.n()));
    int outside = 0;
    for (Eigen::Index j = 0; j < d.m(); ++j) {
        const Vector c = g.col(j);
        if (std::abs(c.mean()) > 4.0 * test::col_sd(c) / root_n) ++outside;
    }
    CHECK(outside == 0);

    const Vector Gbar = moment_derivative_values(d, fit).colwise().mean();
    int negative = 0;
    for (Eigen::Index j = 0; j < d.m(); ++j) negative += Gbar(j) < 0 ? 1 : 0;
    // each entry is about -1 with unit sampling noise at this size
    CHECK(negative >= 70);
    CHECK(Gbar.mean() < 0);
}

namespace {

// Count of moment components whose sample mean is more than 4 MC-SEs from 0.
int components_off_zero(const Dataset& d, const NuisanceFit& fit, double beta)
{
    const Matrix g = influence_values(d, fit, beta);
    const double root_n = std::sqrt(static_cast<double>(d.n()));
    int off = 0;
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
        const Vector c = g.col(j);
        if (std::abs(c.mean()) > 4.0 * test::col_sd(c) / root_n) ++off;
    }
    return off;
}

} // namespace

TEST_CASE("multiple robustness: one of the two regressions may be misspecified")
{
    const auto d = test::baseline_data(100, 10000, 0.1, 29);
    const auto good = fit_nuisance(d);

    SUBCASE("outcome regression ignores the SNPs")
    {
        NuisanceFit fit = good;
        fit.lambda.setZero();
        fit.lambda(0) = d.Y().mean();
        fit.delta_Y = d.Y().array() - d.Y().mean();
        fit.omega_at_sample.setConstant(fit.delta_A.cwiseProduct(fit.delta_Y).mean());
        CHECK(components_off_zero(d, fit, 0.4) == 0);
        // the misspecification is real: delta_Y now carries the SNP signal
        CHECK((fit.delta_Y - good.delta_Y).norm() > 0.5 * good.delta_Y.norm());
    }
    SUBCASE("exposure regression ignores the SNPs")
    {
        NuisanceFit fit = good;
        fit.mu.setZero();
        fit.mu(0) = d.A().mean();
        fit.delta_A = d.A().array() - d.A().mean();
        fit.omega_at_sample.setConstant(fit.delta_A.cwiseProduct(fit.delta_Y).mean());
        fit.theta_at_sample.setConstant(fit.delta_A.squaredNorm() / static_cast<double>(d.n()));
        CHECK(components_off_zero(d, fit, 0.4) == 0);
        CHECK((fit.delta_A - good.delta_A).norm() > 0.5 * good.delta_A.norm());
    }
}
