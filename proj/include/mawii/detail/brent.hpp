#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace mawii {

template <class F>
std::pair<double, double> brent_root(F&& f, double a, double b, double fa, double fb, double f_tol, int max_iter,
                                     int& evaluations)
{
    constexpr double eps = std::numeric_limits<double>::epsilon();
    if (std::abs(fa) <= f_tol) return {a, fa};
    if (std::abs(fb) <= f_tol) return {b, fb};

    double c = a;
    double fc = fa;
    double d = b - a;
    double e = d;
    for (int iter = 0; iter < max_iter; ++iter) {
        if ((fb > 0) == (fc > 0)) {
            c = a;
            fc = fa;
            d = e = b - a;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        const double tol = 2.0 * eps * std::abs(b) + 1e-300;
        const double half = 0.5 * (c - b);
        if (std::abs(fb) <= f_tol || std::abs(half) <= tol) return {b, fb};

        if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
            // interpolation: secant when a == c, inverse quadratic otherwise
            double p;
            double q;
            const double s = fb / fa;
            if (a == c) {
                p = 2.0 * half * s;
                q = 1.0 - s;
            } else {
                const double qa = fa / fc;
                const double r = fb / fc;
                p = s * (2.0 * half * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0) {
                q = -q;
            } else {
                p = -p;
            }
            if (2.0 * p < std::min(3.0 * half * q - std::abs(tol * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = half;
                e = d;
            }
        } else {
            d = half;
            e = d;
        }
        a = b;
        fa = fb;
        b += std::abs(d) > tol ? d : (half > 0 ? tol : -tol);
        fb = f(b);
        ++evaluations;
    }
    return {b, fb};
}

} // namespace mawii
