#pragma once

#include <mawii/data.hpp>
#include <mawii/simulate.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace mawii::test {

inline SimulationConfig small_config(int m, int n, double gamma, std::uint64_t seed = 7,
                                     Scenario scenario = Scenario::baseline)
{
    SimulationConfig c;
    c.scenario = scenario;
    c.m = m;
    c.n = n;
    c.gamma = gamma;
    c.seed = seed;
    c.n_reps = 1;
    c.workers = 1;
    return c;
}

inline Dataset baseline_data(int m, int n, double gamma, std::uint64_t seed = 7, std::uint64_t rep = 0)
{
    return generate(small_config(m, n, gamma, seed), rep).data;
}

// Solves X'X b = X'y by Gauss-Jordan elimination with partial pivoting in
// long double, entry by entry. Deliberately shares nothing with the library.
inline std::vector<double> normal_equations(const Matrix& X, const Vector& y)
{
    const auto p = static_cast<std::size_t>(X.cols());
    const auto n = X.rows();
    std::vector<std::vector<long double>> a(p, std::vector<long double>(p + 1, 0.0L));
    for (std::size_t r = 0; r < p; ++r) {
        for (std::size_t c = 0; c < p; ++c) {
            long double s = 0;
            for (Eigen::Index i = 0; i < n; ++i) {
                s += static_cast<long double>(X(i, static_cast<Eigen::Index>(r))) * X(i, static_cast<Eigen::Index>(c));
            }
            a[r][c] = s;
        }
        long double s = 0;
        for (Eigen::Index i = 0; i < n; ++i) s += static_cast<long double>(X(i, static_cast<Eigen::Index>(r))) * y(i);
        a[r][p] = s;
    }
    for (std::size_t col = 0; col < p; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < p; ++r) {
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        }
        std::swap(a[col], a[piv]);
        for (std::size_t r = 0; r < p; ++r) {
            if (r == col) continue;
            const long double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c <= p; ++c) a[r][c] -= f * a[col][c];
        }
    }
    std::vector<double> b(p);
    for (std::size_t r = 0; r < p; ++r) b[r] = static_cast<double>(a[r][p] / a[r][r]);
    return b;
}

inline double rel_err(double a, double b)
{
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

inline double col_sd(const Vector& v)
{
    return std::sqrt((v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1));
}

inline std::filesystem::path scratch_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("mawii_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// Spearman rank correlation (no tie correction; used on continuous data).
inline double rank_correlation(const Vector& a, const Vector& b)
{
    auto ranks = [](const Vector& v) {
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(v.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<Eigen::Index>(i);
        std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return v(x) < v(y); });
        Vector r(v.size());
        for (std::size_t k = 0; k < idx.size(); ++k) r(idx[k]) = static_cast<double>(k);
        return r;
    };
    const Vector ra = ranks(a);
    const Vector rb = ranks(b);
    const Vector ca = ra.array() - ra.mean();
    const Vector cb = rb.array() - rb.mean();
    return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

} // namespace mawii::test
