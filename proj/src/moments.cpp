#include <mawii/moments.hpp>
#include <mawii/error.hpp>

namespace mawii {

namespace {

void check_dimensions(const Dataset& d, const NuisanceFit& fit)
{
    const auto n = d.n();
    const bool ok = fit.Pi.rows() == d.d_x() && fit.Pi.cols() == d.m() && fit.delta_A.size() == n &&
                    fit.delta_Y.size() == n && fit.omega_at_sample.size() == n && fit.theta_at_sample.size() == n;
    if (!ok) {
        throw input_error("nuisance fit does not match dataset dimensions",
                          {{"n", n}, {"m", d.m()}, {"d_x", d.d_x()}, {"Pi_rows", fit.Pi.rows()},
                           {"Pi_cols", fit.Pi.cols()}, {"delta_A", fit.delta_A.size()}});
    }
}

Matrix centered_snps(const Dataset& d, const NuisanceFit& fit)
{
    return d.Z() - d.X() * fit.Pi;
}

Matrix symmetric_gram(const Matrix& a, double scale)
{
    Matrix out = Matrix::Zero(a.cols(), a.cols());
    out.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose(), scale);
    out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
    return out;
}

} // namespace

MomentContext::MomentContext(const Dataset& d, const NuisanceFit& fit)
{
    check_dimensions(d, fit);
    const Matrix zc = centered_snps(d, fit);
    const Vector base = fit.delta_A.cwiseProduct(fit.delta_Y) - fit.omega_at_sample;
    const Vector slope = fit.theta_at_sample - fit.delta_A.cwiseAbs2();
    g0_ = zc.array().colwise() * base.array();
    G_ = zc.array().colwise() * slope.array();

    const double inv_n = 1.0 / static_cast<double>(d.n());
    g0_mean_ = g0_.colwise().mean();
    G_mean_ = G_.colwise().mean();
    cross_gg_ = symmetric_gram(g0_, inv_n);
    cross_GG_ = symmetric_gram(G_, inv_n);
    cross_gG_ = (G_.transpose() * g0_) * inv_n;
}

Matrix MomentContext::omega(double beta) const
{
    Matrix o = cross_gg_ + beta * (cross_gG_ + cross_gG_.transpose()) + (beta * beta) * cross_GG_;
    return o;
}

ObjectiveValue MomentContext::objective(double beta) const
{
    const Vector g = gbar(beta);
    const Matrix om = omega(beta);
    const SpdSolver solver(om);
    const Matrix s = cross(beta);

    const Vector w = solver.solve(g);
    const Vector dom_w = s * w + s.transpose() * w;  // dOmega/dbeta * w
    const Vector v = solver.solve(G_mean_);
    const Vector u = solver.solve(dom_w);

    ObjectiveValue out;
    out.beta = beta;
    out.condition = solver.condition();
    out.Q = 0.5 * g.dot(w);
    out.dQ = G_mean_.dot(w) - w.dot(s * w);
    out.d2Q = G_mean_.dot(v) - 2.0 * G_mean_.dot(u) + dom_w.dot(u) - w.dot(cross_GG_ * w);
    return out;
}

MomentState MomentContext::state(double beta) const
{
    MomentState st;
    st.beta = beta;
    st.g = g0_ + beta * G_;
    st.Gmat = G_;
    st.gbar = gbar(beta);
    st.Omega = omega(beta);
    const auto obj = objective(beta);
    st.Q = obj.Q;
    st.dQ = obj.dQ;
    st.d2Q = obj.d2Q;
    return st;
}

Matrix influence_values(const Dataset& d, const NuisanceFit& fit, double beta)
{
    check_dimensions(d, fit);
    // Evaluated in the split form g(0) + beta * G so that linearity in beta
    // holds exactly in floating point.
    const Matrix zc = centered_snps(d, fit);
    const Vector base = fit.delta_A.cwiseProduct(fit.delta_Y) - fit.omega_at_sample;
    const Vector slope = fit.theta_at_sample - fit.delta_A.cwiseAbs2();
    const Matrix g0 = zc.array().colwise() * base.array();
    const Matrix G = zc.array().colwise() * slope.array();
    return g0 + beta * G;
}

Matrix moment_derivative_values(const Dataset& d, const NuisanceFit& fit)
{
    check_dimensions(d, fit);
    const Vector factor = fit.theta_at_sample - fit.delta_A.cwiseAbs2();
    return centered_snps(d, fit).array().colwise() * factor.array();
}

ObjectiveValue cue_objective(const MomentContext& ctx, double beta)
{
    return ctx.objective(beta);
}

} // namespace mawii
