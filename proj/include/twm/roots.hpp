#pragma once

#include <cmath>
#include <optional>

namespace twm {

/// Bisection on [lo, hi] for a continuous function with f(lo) f(hi) <= 0.
/// Stops when the bracket is narrower than x_tol or |f| < f_tol. Returns
/// empty when the endpoints do not bracket a root.
template <class Func>
std::optional<double> bisect(Func&& f, double lo, double hi, double x_tol = 1e-13, double f_tol = 0.0,
                             int max_iter = 200) {
    double f_lo = f(lo);
    const double f_hi = f(hi);
    if (f_lo == 0.0) return lo;
    if (f_hi == 0.0) return hi;
    if (std::signbit(f_lo) == std::signbit(f_hi)) return std::nullopt;
    for (int i = 0; i < max_iter && std::abs(hi - lo) > x_tol; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = f(mid);
        if (std::abs(f_mid) <= f_tol) return mid;
        if (std::signbit(f_mid) == std::signbit(f_lo)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace twm
