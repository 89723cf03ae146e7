#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace mawii {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Column-pivoted QR least squares with an explicit rank check.
//
// Columns whose pivoted R diagonal falls below `rank_tol` times the largest
// one are reported as collinear (by name) and construction throws input_error.
class LeastSquares
{
public:
    static constexpr double rank_tol = 1e-10;

    LeastSquares(const Matrix& design, std::vector<std::string> column_names);

    Eigen::Index rows() const noexcept { return rows_; }
    Eigen::Index cols() const noexcept { return cols_; }

    Matrix coefficients(const Matrix& rhs) const;
    Vector coefficients(const Vector& rhs) const;

    // rhs - design * coefficients(rhs)
    Matrix residuals(const Matrix& rhs) const;
    Vector residuals(const Vector& rhs) const;

    // (design^T design)^{-1}
    Matrix inverse_gram() const;

private:
    Eigen::ColPivHouseholderQR<Matrix> qr_;
    Eigen::Index rows_;
    Eigen::Index cols_;
};

// Names "col0", "col1", ... for designs without user-facing labels.
std::vector<std::string> default_column_names(Eigen::Index count, const std::string& prefix = "col");

// Pairwise (cascade) summation; result does not depend on thread scheduling
// as long as the input order is fixed.
double pairwise_sum(std::span<const double> values);

double mean(std::span<const double> values);

// Sample standard deviation (n - 1 denominator). Requires size >= 2.
double sample_sd(std::span<const double> values);

double normal_cdf(double x);
double normal_quantile(double p);
double chi_squared_sf(double x, double df);

// Reciprocal condition estimate and factorization of a symmetric positive
// definite matrix; throws estimation_error if not positive definite or if the
// condition estimate exceeds `max_condition`.
class SpdSolver
{
public:
    static constexpr double max_condition = 1e12;

    explicit SpdSolver(const Matrix& a);

    Vector solve(const Vector& b) const { return llt_.solve(b); }
    Matrix solve(const Matrix& b) const { return llt_.solve(b); }
    double condition() const noexcept { return condition_; }

private:
    Eigen::LLT<Matrix> llt_;
    double condition_ = 1.0;
};

} // namespace mawii
