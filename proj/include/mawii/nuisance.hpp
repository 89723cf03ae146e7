#pragma once

#include <mawii/data.hpp>
#include <mawii/linalg.hpp>

#include <nlohmann/json.hpp>

#include <optional>
#include <vector>

namespace mawii {

// Least-squares part of the nuisance parameters.
struct LinearNuisance
{
    Matrix Pi;       // d_x x m, column j = coefficients of Z_j on X
    Vector mu;       // coefficients of A on (X, Z)
    Vector lambda;   // coefficients of Y on (X, Z)
    Vector delta_A;  // A - (X, Z) mu
    Vector delta_Y;  // Y - (X, Z) lambda
};

// All plug-in nuisance estimates used by the moment conditions.
//
// A plain aggregate: the moment code only reads it, and tests build
// deliberately misspecified fits by hand.
struct NuisanceFit
{
    Matrix Pi;
    Vector mu;
    Vector lambda;
    Vector delta_A;
    Vector delta_Y;
    Vector omega_at_sample;  // E(delta_A delta_Y | X_i)
    Vector theta_at_sample;  // E(delta_A^2 | X_i)
    std::optional<double> bandwidth;
};

LinearNuisance fit_linear_nuisance(const Dataset& d);

// Nadaraya-Watson fit at every sample point with the Epanechnikov product
// kernel on the non-intercept columns of X. Observation i contributes to its
// own fitted value. Throws input_error on an empty neighborhood.
Vector kernel_regress(const Vector& targets, const Matrix& X, double sigma);

// Same, several targets sharing one set of kernel weights; column k equals
// kernel_regress(targets.col(k), X, sigma) bit for bit.
Matrix kernel_regress(const Matrix& targets, const Matrix& X, double sigma);

// Candidate bandwidths: 25 log-spaced points from 0.1 x the smallest to
// 3 x the largest standard deviation among the non-intercept columns.
std::vector<double> bandwidth_grid(const Matrix& X);

// Leave-one-out mean squared prediction error for each bandwidth; +inf where
// some point has no neighbor inside the kernel support.
std::vector<double> loo_errors(const Vector& targets, const Matrix& X, const std::vector<double>& grid);

// Minimizes the leave-one-out error over bandwidth_grid(X). Ties (within
// 1e-12 of mean(targets^2)) go to the candidate closest to the grid midpoint.
double select_bandwidth(const Vector& targets, const Matrix& X);

NuisanceFit fit_nuisance(const Dataset& d);

nlohmann::json to_json(const NuisanceFit& fit);

} // namespace mawii
