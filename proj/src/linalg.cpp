#include <mawii/linalg.hpp>
#include <mawii/error.hpp>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <limits>

namespace mawii {

LeastSquares::LeastSquares(const Matrix& design, std::vector<std::string> column_names)
    : rows_(design.rows()), cols_(design.cols())
{
    if (static_cast<Eigen::Index>(column_names.size()) != cols_) {
        column_names = default_column_names(cols_);
    }
    if (rows_ <= cols_) {
        throw input_error("least squares needs more rows than columns",
                          {{"rows", rows_}, {"cols", cols_}});
    }
    qr_.setThreshold(rank_tol);
    qr_.compute(design);
    const auto rank = qr_.rank();
    if (rank < cols_) {
        nlohmann::json names = nlohmann::json::array();
        const auto& perm = qr_.colsPermutation().indices();
        for (Eigen::Index k = rank; k < cols_; ++k) {
            names.push_back(column_names[perm(k)]);
        }
        throw input_error("rank-deficient design matrix; collinear columns: " + names.dump(),
                          {{"collinear_columns", names}, {"rank", rank}, {"cols", cols_}});
    }
}

Matrix LeastSquares::coefficients(const Matrix& rhs) const { return qr_.solve(rhs); }

Vector LeastSquares::coefficients(const Vector& rhs) const { return qr_.solve(rhs); }

Matrix LeastSquares::residuals(const Matrix& rhs) const
{
    // Q^T rhs with the first `cols` entries zeroed, mapped back by Q, is the
    // orthogonal-complement projection; more accurate than rhs - X b.
    Matrix qtb = qr_.householderQ().transpose() * rhs;
    qtb.topRows(cols_).setZero();
    return qr_.householderQ() * qtb;
}

Vector LeastSquares::residuals(const Vector& rhs) const
{
    Matrix r = residuals(Matrix(rhs));
    return r.col(0);
}

Matrix LeastSquares::inverse_gram() const
{
    // (X^T X)^{-1} = P R^{-1} R^{-T} P^T
    const auto r = qr_.matrixR().topLeftCorner(cols_, cols_).triangularView<Eigen::Upper>();
    Matrix rinv = Matrix::Identity(cols_, cols_);
    r.solveInPlace(rinv);
    Matrix inner = rinv * rinv.transpose();
    const auto& p = qr_.colsPermutation();
    return p * inner * p.transpose();
}

std::vector<std::string> default_column_names(Eigen::Index count, const std::string& prefix)
{
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(count));
    for (Eigen::Index k = 0; k < count; ++k) {
        names.push_back(prefix + std::to_string(k));
    }
    return names;
}

double pairwise_sum(std::span<const double> values)
{
    constexpr std::size_t block = 8;
    if (values.size() <= block) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const auto half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double mean(std::span<const double> values)
{
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    return pairwise_sum(values) / static_cast<double>(values.size());
}

double sample_sd(std::span<const double> values)
{
    if (values.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double mu = mean(values);
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double d = values[i] - mu;
        sq[i] = d * d;
    }
    return std::sqrt(pairwise_sum(sq) / static_cast<double>(values.size() - 1));
}

double normal_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double normal_quantile(double p)
{
    return boost::math::quantile(boost::math::normal_distribution<double>{}, p);
}

double chi_squared_sf(double x, double df)
{
    if (x <= 0.0) return 1.0;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>{df}, x));
}

SpdSolver::SpdSolver(const Matrix& a) : llt_(a)
{
    if (llt_.info() != Eigen::Success) {
        throw estimation_error("ill-conditioned weighting matrix: not positive definite",
                               {{"condition", std::numeric_limits<double>::infinity()}});
    }
    const double rc = llt_.rcond();
    condition_ = rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
    if (!(condition_ <= max_condition)) {
        throw estimation_error("ill-conditioned weighting matrix (condition estimate " +
                                   std::to_string(condition_) + ")",
                               {{"condition", condition_}});
    }
}

} // namespace mawii
