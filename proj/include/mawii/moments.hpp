#pragma once

#include <mawii/data.hpp>
#include <mawii/linalg.hpp>
#include <mawii/nuisance.hpp>

namespace mawii {

// CUE objective Q(beta) = gbar' Omega^{-1} gbar / 2 and its exact first and
// second derivatives in beta (Omega re-evaluated at beta).
struct ObjectiveValue
{
    double beta = 0;
    double Q = 0;
    double dQ = 0;
    double d2Q = 0;
    double condition = 1;  // condition estimate of Omega(beta)
};

// Full per-sample view of the moment stack at one beta.
struct MomentState
{
    double beta = 0;
    Matrix g;      // n x m, row i = g_i(beta)
    Matrix Gmat;   // n x m, row i = G_i (beta-free)
    Vector gbar;
    Matrix Omega;
    double Q = 0;
    double dQ = 0;
    double d2Q = 0;
};

// Evaluation context for the influence-function moments
//
//     g_i(beta) = (Z_i - X_i Pi) * (Delta_i - omega(X_i) + beta * theta(X_i)),
//     Delta_i   = dA_i dY_i - beta dA_i^2,
//
// which are linear in beta: g_i(beta) = g_i(0) + beta * G_i. g(0), G and the
// three m x m cross products are computed once; every beta afterwards costs
// one m x m Cholesky. Immutable, so concurrent evaluation is safe.
class MomentContext
{
public:
    MomentContext(const Dataset& d, const NuisanceFit& fit);

    Eigen::Index n() const noexcept { return g0_.rows(); }
    Eigen::Index m() const noexcept { return g0_.cols(); }

    const Matrix& g0() const noexcept { return g0_; }
    const Matrix& Gmat() const noexcept { return G_; }
    const Vector& g0_mean() const noexcept { return g0_mean_; }
    const Vector& G_mean() const noexcept { return G_mean_; }

    Vector gbar(double beta) const { return g0_mean_ + beta * G_mean_; }

    // (1/n) sum g_i(beta) g_i(beta)'
    Matrix omega(double beta) const;

    // (1/n) sum G_i g_i(beta)'
    Matrix cross(double beta) const { return cross_gG_ + beta * cross_GG_; }

    // (1/n) sum G_i G_i'
    const Matrix& cross_GG() const noexcept { return cross_GG_; }

    ObjectiveValue objective(double beta) const;

    MomentState state(double beta) const;

private:
    Matrix g0_;
    Matrix G_;
    Vector g0_mean_;
    Vector G_mean_;
    Matrix cross_gg_;  // (1/n) sum g_i(0) g_i(0)'
    Matrix cross_gG_;  // (1/n) sum G_i g_i(0)'
    Matrix cross_GG_;
};

// n x m matrix of g_i(beta).
Matrix influence_values(const Dataset& d, const NuisanceFit& fit, double beta);

// n x m matrix of G_i = d g_i / d beta.
Matrix moment_derivative_values(const Dataset& d, const NuisanceFit& fit);

ObjectiveValue cue_objective(const MomentContext& ctx, double beta);

} // namespace mawii
