#include <mawii/cue.hpp>
#include <mawii/error.hpp>

#include <cmath>
#include <limits>
#include <optional>

namespace mawii {

void OptimizerSettings::validate() const
{
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
        throw input_error("optimizer bounds must satisfy lo < hi", {{"lo", lo}, {"hi", hi}});
    }
    if (grid_points < 11) throw input_error("optimizer grid needs at least 11 points", {{"grid_points", grid_points}});
    if (!(boundary_margin >= 0.0 && boundary_margin < 0.5)) {
        throw input_error("boundary margin must be in [0, 0.5)", {{"boundary_margin", boundary_margin}});
    }
    if (!(deriv_tol >= 0.0)) throw input_error("derivative tolerance must be non-negative");
    if (max_iter < 1) throw input_error("max_iter must be positive");
}

namespace {

class Evaluator
{
public:
    Evaluator(const MomentContext& ctx, CueSolve& out) : ctx_(ctx), out_(out) {}

    ObjectiveValue operator()(double beta)
    {
        ObjectiveValue v;
        try {
            v = ctx_.objective(beta);
        } catch (const estimation_error& e) {
            auto detail = e.detail();
            detail["beta"] = beta;
            throw estimation_error(std::string(e.what()) + " at beta = " + std::to_string(beta), detail);
        }
        ++out_.n_evaluations;
        out_.trajectory.emplace_back(beta, v.Q);
        if (!std::isfinite(v.Q) || !std::isfinite(v.dQ)) {
            throw estimation_error("non-finite CUE objective at beta = " + std::to_string(beta), {{"beta", beta}});
        }
        return v;
    }

private:
    const MomentContext& ctx_;
    CueSolve& out_;
};

// Root of dQ on [a, b] where dQ(a) < 0 < dQ(b).
ObjectiveValue solve_cell(Evaluator& eval, const ObjectiveValue& left, const ObjectiveValue& right,
                          const OptimizerSettings& settings)
{
    std::optional<ObjectiveValue> last;
    int evaluations = 0;
    auto f = [&](double beta) {
        last = eval(beta);
        return last->dQ;
    };
    const auto [root, froot] =
        brent_root(f, left.beta, right.beta, left.dQ, right.dQ, settings.deriv_tol, settings.max_iter, evaluations);
    (void)froot;
    ObjectiveValue v = root == left.beta ? left : root == right.beta ? right : last && last->beta == root ? *last : eval(root);

    // A dQ tolerance leaves beta off by about tol / d2Q, which is visible on
    // flat objectives. A few Newton steps inside the cell remove it.
    for (int k = 0; k < 3 && v.dQ != 0.0 && v.d2Q > 0.0; ++k) {
        const double next = v.beta - v.dQ / v.d2Q;
        if (!(next > left.beta && next < right.beta)) break;
        if (std::abs(next - v.beta) <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(v.beta)) break;
        const auto w = eval(next);
        if (!(std::abs(w.dQ) < std::abs(v.dQ))) break;
        v = w;
    }
    return v;
}

} // namespace

CueSolve minimize_cue(const MomentContext& ctx, const OptimizerSettings& settings)
{
    settings.validate();
    CueSolve out;
    Evaluator eval(ctx, out);

    const int k_max = settings.grid_points - 1;
    const double width = settings.hi - settings.lo;
    std::vector<ObjectiveValue> grid;
    grid.reserve(static_cast<std::size_t>(settings.grid_points));
    for (int k = 0; k <= k_max; ++k) {
        const double beta = k == k_max ? settings.hi : settings.lo + width * k / k_max;
        grid.push_back(eval(beta));
    }

    std::size_t kmin = 0;
    for (std::size_t k = 1; k < grid.size(); ++k) {
        if (grid[k].Q < grid[kmin].Q) kmin = k;
    }
    const double scan_beta = grid[kmin].beta;
    const double margin = settings.boundary_margin * width;
    auto near_boundary = [&](double beta) {
        return beta - settings.lo <= margin || settings.hi - beta <= margin;
    };
    auto accept = [&](const ObjectiveValue& v, bool boundary) {
        out.beta_hat = v.beta;
        out.Q_min = v.Q;
        out.dQ_at_min = v.dQ;
        out.d2Q_at_min = v.d2Q;
        out.boundary_flag = boundary;
        return out;
    };

    // Step 2: refine inside the cell that brackets the scan minimum.
    std::optional<ObjectiveValue> refined;
    const auto& at = grid[kmin];
    if (std::abs(at.dQ) <= settings.deriv_tol) {
        refined = at;
    } else if (at.dQ < 0) {
        for (std::size_t k = kmin; k + 1 < grid.size(); ++k) {
            if (grid[k + 1].dQ >= 0) {
                refined = solve_cell(eval, grid[k], grid[k + 1], settings);
                break;
            }
        }
    } else {
        for (std::size_t k = kmin; k > 0; --k) {
            if (grid[k - 1].dQ <= 0) {
                refined = solve_cell(eval, grid[k - 1], grid[k], settings);
                break;
            }
        }
    }
    if (refined && !near_boundary(refined->beta)) return accept(*refined, false);

    // Step 3: the local solution hugs the boundary; look for interior minima.
    out.discarded_boundary = true;
    std::optional<ObjectiveValue> best;
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        if (!(grid[k].dQ < 0 && grid[k + 1].dQ >= 0)) continue;
        const auto candidate = solve_cell(eval, grid[k], grid[k + 1], settings);
        if (near_boundary(candidate.beta)) continue;
        if (!best || candidate.Q < best->Q - 1e-12) {
            best = candidate;
        } else if (std::abs(candidate.Q - best->Q) <= 1e-12 &&
                   std::abs(candidate.beta - scan_beta) < std::abs(best->beta - scan_beta)) {
            best = candidate;
        }
    }
    if (best) return accept(*best, false);

    // Step 4: nothing interior.
    return accept(refined ? *refined : grid[kmin], true);
}

nlohmann::json to_json(const CueSolve& s, bool with_trajectory)
{
    nlohmann::json out = {
        {"beta_hat", s.beta_hat},
        {"Q_min", s.Q_min},
        {"dQ_at_min", s.dQ_at_min},
        {"d2Q_at_min", s.d2Q_at_min},
        {"boundary_flag", s.boundary_flag},
        {"discarded_boundary", s.discarded_boundary},
        {"n_evaluations", s.n_evaluations},
    };
    if (with_trajectory) {
        nlohmann::json traj = nlohmann::json::array();
        for (const auto& [b, q] : s.trajectory) traj.push_back({{"beta", b}, {"Q", q}});
        out["trajectory"] = std::move(traj);
    }
    return out;
}

} // namespace mawii
