#include <mawii/comparators.hpp>
#include <mawii/error.hpp>
#include <mawii/inference.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace mawii {

namespace {

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

// Columns of M with the X projection removed.
Matrix partial_out_covariates(const Dataset& d, const Matrix& M)
{
    if (d.d_x() == 1) return M.rowwise() - M.colwise().mean();
    const LeastSquares ls(d.X(), d.covariate_names());
    return ls.residuals(M);
}

} // namespace

std::string method_name(Method m)
{
    switch (m) {
    case Method::genius_mawii: return "GENIUS-MAWII";
    case Method::two_sls: return "2SLS";
    case Method::liml: return "LIML";
    case Method::ivw: return "IVW";
    case Method::divw: return "dIVW";
    case Method::mr_egger: return "MR-Egger";
    case Method::genius_gmm2: return "GENIUS-GMM2";
    case Method::genius_cue_classical: return "GENIUS-CUE";
    }
    return "?";
}

const std::vector<Method>& all_methods()
{
    static const std::vector<Method> methods = {
        Method::genius_mawii, Method::two_sls, Method::liml,        Method::ivw,
        Method::divw,         Method::mr_egger, Method::genius_gmm2, Method::genius_cue_classical,
    };
    return methods;
}

Method parse_method(const std::string& name)
{
    const auto key = lower(trim(name));
    for (auto m : all_methods()) {
        if (key == lower(method_name(m))) return m;
    }
    static const std::map<std::string, Method> aliases = {
        {"mawii", Method::genius_mawii},
        {"genius_mawii", Method::genius_mawii},
        {"two_sls", Method::two_sls},
        {"tsls", Method::two_sls},
        {"divw", Method::divw},
        {"egger", Method::mr_egger},
        {"mr_egger", Method::mr_egger},
        {"gmm2", Method::genius_gmm2},
        {"genius_gmm2", Method::genius_gmm2},
        {"cue", Method::genius_cue_classical},
        {"cue_classical", Method::genius_cue_classical},
        {"genius_cue", Method::genius_cue_classical},
        {"genius_cue_classical", Method::genius_cue_classical},
    };
    if (auto it = aliases.find(key); it != aliases.end()) return it->second;
    throw input_error("unknown method '" + name + "'", {{"method", name}});
}

std::vector<Method> parse_methods(const std::string& list)
{
    if (lower(trim(list)) == "all") return all_methods();
    std::vector<Method> out;
    std::istringstream in(list);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (trim(item).empty()) continue;
        const auto m = parse_method(item);
        if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    if (out.empty()) throw input_error("empty method list");
    return out;
}

nlohmann::json to_json(const ComparatorEstimate& e)
{
    return {{"method", method_name(e.method)}, {"beta", e.beta}, {"se", e.se}, {"extras", e.extras}};
}

SummaryStats summarize(const Dataset& d)
{
    const auto n = d.n();
    const auto m = d.m();
    const Matrix Zx = partial_out_covariates(d, d.Z());
    Matrix AY(n, 2);
    AY.col(0) = d.A();
    AY.col(1) = d.Y();
    const Matrix AYx = partial_out_covariates(d, AY);

    SummaryStats s;
    s.gamma_hat.resize(m);
    s.Gamma_hat.resize(m);
    s.se_gamma.resize(m);
    s.se_Gamma.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const auto z = Zx.col(j);
        const double zz = z.squaredNorm();
        if (!(zz > 0.0)) throw input_error("SNP is collinear with the covariates", {{"snp", d.snp_names()[static_cast<std::size_t>(j)]}});
        for (int k = 0; k < 2; ++k) {
            const auto y = AYx.col(k);
            const double coef = z.dot(y) / zz;
            const Vector resid = y - coef * z;
            const double meat = (z.array().square() * resid.array().square()).sum();
            const double se = std::sqrt(meat) / zz;
            if (k == 0) {
                s.gamma_hat(j) = coef;
                s.se_gamma(j) = se;
            } else {
                s.Gamma_hat(j) = coef;
                s.se_Gamma(j) = se;
            }
        }
    }
    return s;
}

IvProjections iv_projections(const Dataset& d)
{
    const auto lin = fit_linear_nuisance(d);
    NuisanceFit fit;
    fit.delta_A = lin.delta_A;
    fit.delta_Y = lin.delta_Y;
    return iv_projections(d, fit);
}

IvProjections iv_projections(const Dataset& d, const NuisanceFit& fit)
{
    Matrix AY(d.n(), 2);
    AY.col(0) = d.A();
    AY.col(1) = d.Y();
    const Matrix AYx = partial_out_covariates(d, AY);
    IvProjections p;
    p.A_x = AYx.col(0);
    p.Y_x = AYx.col(1);
    p.dA = fit.delta_A;
    p.dY = fit.delta_Y;
    p.residual_df = static_cast<double>(d.n() - d.d_x() - 1);
    return p;
}

ComparatorEstimate k_class(const IvProjections& p, double kappa, Method method)
{
    const double denom = p.A_x.squaredNorm() - kappa * p.dA.squaredNorm();
    if (!(denom > 0.0)) {
        throw estimation_error("k-class denominator is not positive; instruments carry no exposure signal",
                               {{"method", method_name(method)}, {"kappa", kappa}, {"denominator", denom}});
    }
    ComparatorEstimate e;
    e.method = method;
    e.beta = (p.A_x.dot(p.Y_x) - kappa * p.dA.dot(p.dY)) / denom;
    const double sigma2 = (p.Y_x - e.beta * p.A_x).squaredNorm() / p.residual_df;
    e.se = std::sqrt(sigma2 / denom);
    e.extras["kappa"] = kappa;
    return e;
}

ComparatorEstimate two_sls(const IvProjections& p)
{
    return k_class(p, 1.0, Method::two_sls);
}

ComparatorEstimate two_sls(const Dataset& d)
{
    return two_sls(iv_projections(d));
}

ComparatorEstimate liml(const IvProjections& p)
{
    Eigen::Matrix2d outer;  // W' M_X W
    Eigen::Matrix2d inner;  // W' M_XZ W
    outer << p.Y_x.squaredNorm(), p.Y_x.dot(p.A_x), p.Y_x.dot(p.A_x), p.A_x.squaredNorm();
    inner << p.dY.squaredNorm(), p.dY.dot(p.dA), p.dY.dot(p.dA), p.dA.squaredNorm();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix2d> es(outer, inner);
    if (es.info() != Eigen::Success) throw estimation_error("LIML eigenproblem failed");
    return k_class(p, es.eigenvalues().minCoeff(), Method::liml);
}

ComparatorEstimate liml(const Dataset& d)
{
    return liml(iv_projections(d));
}

namespace {

void check_summary(const SummaryStats& s)
{
    const auto m = s.gamma_hat.size();
    if (m == 0 || s.Gamma_hat.size() != m || s.se_gamma.size() != m || s.se_Gamma.size() != m) {
        throw input_error("summary statistics have inconsistent lengths");
    }
    if (!(s.se_Gamma.minCoeff() > 0.0) || !(s.se_gamma.minCoeff() > 0.0)) {
        throw input_error("summary statistics need positive standard errors");
    }
}

} // namespace

ComparatorEstimate ivw(const SummaryStats& s)
{
    check_summary(s);
    const Vector w = s.se_Gamma.array().square().inverse();
    const double denom = (w.array() * s.gamma_hat.array().square()).sum();
    if (!(denom > 0.0)) throw estimation_error("IVW denominator is zero");
    ComparatorEstimate e;
    e.method = Method::ivw;
    e.beta = (w.array() * s.gamma_hat.array() * s.Gamma_hat.array()).sum() / denom;
    double scale = 1.0;
    const auto m = s.gamma_hat.size();
    if (m >= 2) {
        const Vector r = s.Gamma_hat - e.beta * s.gamma_hat;
        const double sigma = std::sqrt((w.array() * r.array().square()).sum() / static_cast<double>(m - 1));
        e.extras["residual_se"] = sigma;
        scale = std::max(sigma, 1.0);
    }
    e.se = scale / std::sqrt(denom);
    return e;
}

ComparatorEstimate divw(const SummaryStats& s)
{
    check_summary(s);
    const Eigen::ArrayXd w = s.se_Gamma.array().square().inverse();
    const Eigen::ArrayXd g2 = s.gamma_hat.array().square();
    const Eigen::ArrayXd sg2 = s.se_gamma.array().square();
    const double denom = (w * (g2 - sg2)).sum();
    if (!(denom > 0.0)) {
        throw estimation_error("dIVW denominator is not positive: instruments are all weak", {{"denominator", denom}});
    }
    ComparatorEstimate e;
    e.method = Method::divw;
    e.beta = (w * s.gamma_hat.array() * s.Gamma_hat.array()).sum() / denom;
    const double b2 = e.beta * e.beta;
    const double v = (w.square() * (g2 / w + b2 * sg2 * (g2 + sg2))).sum() / (denom * denom);
    e.se = std::sqrt(v);
    e.extras["denominator"] = denom;
    return e;
}

ComparatorEstimate mr_egger(const SummaryStats& s, bool with_intercept)
{
    check_summary(s);
    const auto m = s.gamma_hat.size();
    const Eigen::Index p = with_intercept ? 2 : 1;
    if (with_intercept && m < 3) throw input_error("MR-Egger needs at least 3 SNPs", {{"m", m}});

    Matrix X(m, p);
    Vector y(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const double sign = s.gamma_hat(j) < 0 ? -1.0 : 1.0;
        if (with_intercept) X(j, 0) = 1.0;
        X(j, p - 1) = sign * s.gamma_hat(j);
        y(j) = sign * s.Gamma_hat(j);
    }
    const Vector w = s.se_Gamma.array().square().inverse();
    const Matrix XtW = X.transpose() * w.asDiagonal();
    const Matrix gram = XtW * X;
    const Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) {
        throw estimation_error("MR-Egger design is singular");
    }
    const Vector coef = ldlt.solve(XtW * y);
    const Matrix cov = ldlt.solve(Matrix::Identity(p, p));
    const Vector r = y - X * coef;
    const double df = static_cast<double>(m - p);
    const double sigma = df > 0 ? std::sqrt((w.array() * r.array().square()).sum() / df) : 1.0;
    const double scale = std::max(sigma, 1.0);

    ComparatorEstimate e;
    e.method = with_intercept ? Method::mr_egger : Method::ivw;
    e.beta = coef(p - 1);
    e.se = std::sqrt(cov(p - 1, p - 1)) * scale;
    e.extras["residual_se"] = sigma;
    if (with_intercept) {
        e.extras["intercept"] = coef(0);
        e.extras["intercept_se"] = std::sqrt(cov(0, 0)) * scale;
    }
    return e;
}

ComparatorEstimate genius_gmm2(const MomentContext& ctx)
{
    const Vector& g0 = ctx.g0_mean();
    const Vector& G = ctx.G_mean();
    const double GG = G.squaredNorm();
    if (!(GG > 0.0)) throw estimation_error("moment derivative is zero; GMM is not identified");
    const double first = -G.dot(g0) / GG;

    const SpdSolver w1(ctx.omega(first));
    const Vector WG = w1.solve(G);
    const double GWG = G.dot(WG);
    if (!(GWG > 0.0)) throw estimation_error("two-step GMM weight gives no curvature");
    ComparatorEstimate e;
    e.method = Method::genius_gmm2;
    e.beta = -WG.dot(g0) / GWG;

    const SpdSolver w2(ctx.omega(e.beta));
    const double info = G.dot(w2.solve(G));
    e.se = std::sqrt(1.0 / (info * static_cast<double>(ctx.n())));
    e.extras["first_step"] = first;
    return e;
}

ComparatorEstimate genius_gmm2(const Dataset& d, const NuisanceFit& fit)
{
    return genius_gmm2(MomentContext(d, fit));
}

ComparatorEstimate genius_cue_classical(const MomentContext& ctx, const CueSolve& solve)
{
    if (solve.boundary_flag) {
        throw estimation_error("CUE solution lies on the optimizer boundary; variance not available",
                               {{"beta_hat", solve.beta_hat}});
    }
    const SpdSolver w(ctx.omega(solve.beta_hat));
    const Vector& G = ctx.G_mean();
    const double info = G.dot(w.solve(G));
    if (!(info > 0.0)) throw estimation_error("classical CUE information is not positive");
    ComparatorEstimate e;
    e.method = Method::genius_cue_classical;
    e.beta = solve.beta_hat;
    e.se = std::sqrt(1.0 / (info * static_cast<double>(ctx.n())));
    return e;
}

ComparatorEstimate genius_cue_classical(const Dataset& d, const NuisanceFit& fit, const CueSolve& solve)
{
    return genius_cue_classical(MomentContext(d, fit), solve);
}

nlohmann::json to_json(const MethodOutcome& o)
{
    nlohmann::json out = {{"method", method_name(o.method)}, {"ok", o.ok}};
    if (o.ok) {
        out["beta"] = o.beta;
        out["se"] = o.se;
        if (o.nH) out["nH"] = *o.nH;
        if (!o.extras.empty()) out["extras"] = o.extras;
    } else {
        out["error"] = o.error;
        if (o.nH) {
            out["beta"] = o.beta;
            out["nH"] = *o.nH;
        }
    }
    out["warnings"] = o.warnings;
    return out;
}

std::vector<MethodOutcome> run_methods(const Dataset& d, std::span<const Method> methods,
                                       const OptimizerSettings& settings, double alpha)
{
    std::optional<NuisanceFit> fit;
    std::optional<MomentContext> ctx;
    std::optional<CueSolve> solve;
    std::optional<IvProjections> proj;
    std::optional<SummaryStats> summary;

    auto get_fit = [&]() -> const NuisanceFit& {
        if (!fit) fit = fit_nuisance(d);
        return *fit;
    };
    auto get_ctx = [&]() -> const MomentContext& {
        if (!ctx) ctx.emplace(d, get_fit());
        return *ctx;
    };
    auto get_solve = [&]() -> const CueSolve& {
        if (!solve) solve = minimize_cue(get_ctx(), settings);
        return *solve;
    };
    auto get_proj = [&]() -> const IvProjections& {
        if (!proj) proj = iv_projections(d, get_fit());
        return *proj;
    };
    auto get_summary = [&]() -> const SummaryStats& {
        if (!summary) summary = summarize(d);
        return *summary;
    };
    auto from = [](MethodOutcome& o, const ComparatorEstimate& e) {
        o.beta = e.beta;
        o.se = e.se;
        o.extras = e.extras;
    };

    std::vector<MethodOutcome> out;
    for (auto method : methods) {
        MethodOutcome o;
        o.method = method;
        try {
            switch (method) {
            case Method::genius_mawii: {
                // beta_hat and nH survive a failed variance step for the weak-ID sweep.
                const auto& cue = get_solve();
                o.beta = cue.beta_hat;
                o.nH = static_cast<double>(d.n()) * cue.d2Q_at_min;
                const auto est = variance_estimate(get_ctx(), cue, alpha);
                o.beta = est.beta_hat;
                o.se = est.se;
                o.nH = est.nH;
                if (auto w = weak_id_warning(est)) o.warnings.push_back(*w);
                break;
            }
            case Method::two_sls: from(o, two_sls(get_proj())); break;
            case Method::liml: from(o, liml(get_proj())); break;
            case Method::ivw: from(o, ivw(get_summary())); break;
            case Method::divw: from(o, divw(get_summary())); break;
            case Method::mr_egger: from(o, mr_egger(get_summary())); break;
            case Method::genius_gmm2: from(o, genius_gmm2(get_ctx())); break;
            case Method::genius_cue_classical: from(o, genius_cue_classical(get_ctx(), get_solve())); break;
            }
            o.ok = std::isfinite(o.beta) && std::isfinite(o.se);
            if (!o.ok) o.error = "non-finite estimate";
        } catch (const estimation_error& e) {
            o.error = e.what();
        } catch (const input_error& e) {
            o.error = e.what();
        }
        out.push_back(std::move(o));
    }
    return out;
}

} // namespace mawii
