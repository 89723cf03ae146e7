#pragma once

#include <mawii/moments.hpp>

#include <nlohmann/json.hpp>

#include <utility>
#include <vector>

namespace mawii {

struct OptimizerSettings
{
    double lo = -10.0;
    double hi = 10.0;
    int grid_points = 101;
    double deriv_tol = 1e-9;       // on |dQ| at an interior solution
    double boundary_margin = 0.01; // fraction of hi - lo
    int max_iter = 200;            // per root solve

    // Throws input_error unless lo < hi and grid_points >= 11.
    void validate() const;
};

struct CueSolve
{
    double beta_hat = 0;
    double Q_min = 0;
    double dQ_at_min = 0;
    double d2Q_at_min = 0;
    bool boundary_flag = false;
    bool discarded_boundary = false;  // the grid minimum was near an endpoint and was replaced
    int n_evaluations = 0;
    std::vector<std::pair<double, double>> trajectory;  // every (beta, Q) evaluated, in order
};

// Minimizes the CUE objective over [lo, hi]:
//  1. scan Q on a uniform grid;
//  2. refine the grid minimizer by root-finding dQ inside its bracketing cell;
//  3. if that lands within the boundary margin, drop it and root-solve every
//     descending-to-ascending sign change of dQ on the grid, keeping the
//     interior root with the smallest Q (ties within 1e-12 go to the root
//     nearest the scan minimum);
//  4. with no interior root, return the scan minimum flagged as boundary.
CueSolve minimize_cue(const MomentContext& ctx, const OptimizerSettings& settings = {});

// Bracketing root finder (Brent's method) on a scalar function given values at
// both ends with opposite signs. Stops when |f| <= f_tol, when the bracket
// reaches machine resolution, or after max_iter steps.
template <class F>
std::pair<double, double> brent_root(F&& f, double a, double b, double fa, double fb, double f_tol, int max_iter,
                                     int& evaluations);

nlohmann::json to_json(const CueSolve& s, bool with_trajectory = false);

} // namespace mawii

#include <mawii/detail/brent.hpp>
