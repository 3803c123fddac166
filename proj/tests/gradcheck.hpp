#ifndef POWERGEAR_GRADCHECK_HPP
#define POWERGEAR_GRADCHECK_HPP

#include <cmath>
#include <functional>
#include <vector>

namespace powergear::testutil {

/// Central finite differences against a scalar function of a flat
/// parameter vector. Returns the max relative error between analytic and
/// numeric gradients (denominator floored to dodge 0/0).
inline double max_grad_rel_err(const std::function<double(const std::vector<double>&)>& f,
                               const std::vector<double>& at,
                               const std::vector<double>& analytic, double eps = 1e-5) {
    double worst = 0;
    for (std::size_t i = 0; i < at.size(); ++i) {
        std::vector<double> lo = at, hi = at;
        lo[i] -= eps;
        hi[i] += eps;
        double numeric = (f(hi) - f(lo)) / (2 * eps);
        double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
        worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
    }
    return worst;
}

} // namespace powergear::testutil

#endif
