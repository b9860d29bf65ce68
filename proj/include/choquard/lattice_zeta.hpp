#pragma once

#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <utility>

#include "errors.hpp"

namespace choquard {

namespace detail {

// Upper incomplete gamma for any real a, via downward recurrence when a <= 0.
inline double upper_gamma(double a, double x) {
    if (a > 0.0) return boost::math::tgamma(a, x);
    if (a == 0.0) return boost::math::expint(1, x);
    return (upper_gamma(a + 1.0, x) - std::pow(x, a) * std::exp(-x)) / a;
}

}  // namespace detail

// Epstein zeta of the cubic lattice, Z_d(s) = sum over nonzero n in Z^d of |n|^{-2s},
// continued analytically by the Chowla-Selberg/Ewald split (Z^d is self dual).
// Pole at s = d/2; Z_d(0) = -1 and Z_d(-k) = 0 for positive integers k.
inline double lattice_zeta(int d, double s) {
    if (d < 1 || d > 3) throw ParameterError("lattice_zeta supports d in {1,2,3}");
    const double half = 0.5 * d;
    if (std::abs(s - half) < 1e-12) throw ParameterError("lattice_zeta has a pole at s = d/2");
    if (s <= 0.0 && std::abs(s - std::round(s)) < 1e-14) return std::round(s) == 0.0 ? -1.0 : 0.0;

    static std::mutex mutex;
    static std::map<std::pair<int, double>, double> cache;
    {
        std::lock_guard<std::mutex> lock(mutex);
        auto it = cache.find({d, s});
        if (it != cache.end()) return it->second;
    }

    constexpr int R = 6;
    const double pi = std::numbers::pi;
    double sum = -1.0 / s - 1.0 / (half - s);
    const int r1 = d >= 2 ? R : 0;
    const int r2 = d >= 3 ? R : 0;
    for (int i = -R; i <= R; ++i)
        for (int j = -r1; j <= r1; ++j)
            for (int k = -r2; k <= r2; ++k) {
                const int n2 = i * i + j * j + k * k;
                if (n2 == 0) continue;
                const double x = pi * n2;
                sum += detail::upper_gamma(s, x) * std::pow(x, -s) +
                       detail::upper_gamma(half - s, x) * std::pow(x, s - half);
            }
    const double value = sum * std::pow(pi, s) / boost::math::tgamma(s);

    std::lock_guard<std::mutex> lock(mutex);
    cache[{d, s}] = value;
    return value;
}

}  // namespace choquard
