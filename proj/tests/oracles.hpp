#pragma once

// Reference values for the tests, computed without the library's grid code:
// closed forms, 1-D and 2-D radial quadrature, and numbers frozen from the
// scripts in tests/oracles/.

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace oracle {

inline constexpr double pi = std::numbers::pi;

// Frozen from tests/oracles/gn_shooting.py (radial shooting, scipy).
inline constexpr double gn_constant_3_285 = 0.5902700912041448;

// Frozen from tests/oracles/lattice_zeta.py (theta integral, mpmath).
inline constexpr double zeta3_2 = 16.5323159597616696;
inline constexpr double zeta3_half = -2.83729747948061948;
inline constexpr double zeta3_minus_half = -0.266596278718393475;

// Normalization of the Riesz potential: Cbar |x|^{beta-d} has symbol |k|^{-beta}.
inline double riesz_constant(int d, double beta) {
    using boost::math::tgamma;
    return tgamma((d - beta) / 2.0) / (tgamma(beta / 2.0) * std::pow(pi, d / 2.0) * std::pow(2.0, beta));
}

// (I_2 * e^{-b|x|^2})(0) in d = 3 by radial quadrature: (1/4pi) int e^{-b r^2} / r 4 pi r^2 dr.
inline double gaussian_riesz2_at_origin(double b) {
    boost::math::quadrature::exp_sinh<double> integrator;
    return integrator.integrate([b](double r) { return r * std::exp(-b * r * r); });
}

// Newtonian potential (1/(4 pi |x|)) * e^{-|x|^2} in closed form.
inline double gaussian_newton_potential(double r) {
    if (r < 1e-8) return 0.5;
    return std::sqrt(pi) / 4.0 * boost::math::erf(r) / r;
}

// int int f(|x|) f(|y|) / |x - y|^2 dx dy in d = 3 by 2-D radial quadrature.
// The angular mean of |x-y|^{-2} is ln|(r+s)/(r-s)| / (2 r s).
template <class F>
double double_radial_inverse_square(F f, double R) {
    using boost::math::quadrature::gauss_kronrod;
    auto inner = [&](double r) {
        auto kern = [&](double s) {
            if (s == r) return 0.0;
            return f(s) * s * r * 0.5 * std::log(std::abs((r + s) / (r - s)));
        };
        // tanh-sinh tolerates the logarithmic singularity at s = r on both sides
        boost::math::quadrature::tanh_sinh<double> ts;
        const double a = r > 0.0 ? ts.integrate(kern, 0.0, r) : 0.0;
        const double b = ts.integrate(kern, r, R);
        return f(r) * (a + b);
    };
    return 16.0 * pi * pi * gauss_kronrod<double, 31>::integrate(inner, 0.0, R, 12, 1e-10);
}

// D for |u|^p = e^{-b|x|^2} with kernel |x|^{-2}, d = 3: pi^3 / b^2.
inline double gaussian_inverse_square_energy(double b) { return std::pow(pi, 3) / (b * b); }

// Free Schroedinger evolution i u_t + Lap u = 0 of e^{-|x|^2/(2 s2)} in d dimensions.
inline std::complex<double> free_gaussian(double r2, double t, double s2, int d) {
    const std::complex<double> z(s2, 2.0 * t);
    return std::pow(s2 / z, d / 2.0) * std::exp(-r2 / (2.0 * z));
}

// Yukawa Kato integral at the origin: int e^{-r/range} / r^2 d^3y = 4 pi range.
inline double yukawa_kato_origin(double strength, double range) { return 4.0 * pi * strength * range; }

// || s e^{-r/R} / r ||_{3/2} in d = 3: (4 pi s^{3/2} Gamma(3/2) (2R/3)^{3/2})^{2/3}.
inline double yukawa_l32_norm(double strength, double range) {
    const double s = std::abs(strength);
    return std::pow(4.0 * pi * std::pow(s, 1.5) * std::tgamma(1.5) * std::pow(2.0 * range / 3.0, 1.5), 2.0 / 3.0);
}

// Unit ball volume and the threshold d(d-2) |B_1|.
inline double kato_threshold(int d) {
    const double ball = std::pow(pi, d / 2.0) / boost::math::tgamma(d / 2.0 + 1.0);
    return d * (d - 2.0) * ball;
}

// Sharp Sobolev constant d(d-2)/4 |S^d|^{2/d}.
inline double sobolev_closed_form(int d) {
    const double sphere = 2.0 * std::pow(pi, (d + 1) / 2.0) / boost::math::tgamma((d + 1) / 2.0);
    return d * (d - 2.0) / 4.0 * std::pow(sphere, 2.0 / d);
}

}  // namespace oracle
