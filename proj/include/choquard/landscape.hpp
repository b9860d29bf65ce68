#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <nlohmann/json.hpp>

#include "params.hpp"
#include "spectral.hpp"

namespace choquard {

// Sharp Hardy-Littlewood-Sobolev constant for the kernel |x|^{-alpha} at the
// diagonal exponent 2d/(2d-alpha).
inline double hls_constant(int d, double alpha) {
    if (d < 1 || !(alpha > 0.0 && alpha < d)) throw ParameterError("hls_constant requires 0 < alpha < d");
    using boost::math::tgamma;
    const double dd = d;
    return std::pow(std::numbers::pi, alpha / 2.0) * tgamma((dd - alpha) / 2.0) / tgamma(dd - alpha / 2.0) *
           std::pow(tgamma(dd / 2.0) / tgamma(dd), -1.0 + alpha / dd);
}

inline double sphere_area(int d) {
    return 2.0 * std::pow(std::numbers::pi, d / 2.0) / boost::math::tgamma(d / 2.0);
}

// ||grad U||^2 / ||U||_{2*}^2 for U = (lambda^2 + r^2)^{-(d-2)/2}, by radial quadrature.
inline double talenti_quotient(int d, double lambda = 1.0) {
    if (d < 3) throw ParameterError("Sobolev constant requires d >= 3");
    const double dd = d, l2 = lambda * lambda;
    const double two_star = 2.0 * dd / (dd - 2.0);
    // Written through t = r^2 / (lambda^2 + r^2) <= 1 so that no factor overflows at large r.
    auto radial = [&](double r, double k) {
        const double s = l2 + r * r;
        if (!std::isfinite(s)) return 0.0;
        return std::pow(r * r / s, k / 2.0) * std::pow(s, k / 2.0 - dd);
    };
    boost::math::quadrature::exp_sinh<double> integrator;
    const double grad = (dd - 2.0) * (dd - 2.0) * integrator.integrate([&](double r) { return radial(r, dd + 1.0); });
    const double pow_int = integrator.integrate([&](double r) { return radial(r, dd - 1.0); });
    const double area = sphere_area(d);
    return area * grad / std::pow(area * pow_int, 2.0 / two_star);
}

// Optimal constant in S ||u||_{2*}^2 <= ||grad u||_2^2, attained by the Talenti profile.
inline double sobolev_constant(int d) { return talenti_quotient(d, 1.0); }

struct GnOptions {
    std::size_t n = 4096;   // radial cells
    double R = 24.0;        // radial extent
    std::size_t max_iter = 2000;
    double tol = 1e-13;
};

namespace detail {

// Cell-centred finite-volume discretization of the radial Laplacian on (0, R)
// with no flux at the origin and a Dirichlet wall at R.
struct RadialMesh {
    int d;
    std::size_t n;
    double dr;
    std::vector<double> r, weight, face;  // face[j] = area factor at r_{j+1/2}

    RadialMesh(int d_, std::size_t n_, double R) : d(d_), n(n_), dr(R / static_cast<double>(n_)) {
        r.resize(n);
        weight.resize(n);
        face.resize(n);
        const double area = sphere_area(d);
        for (std::size_t j = 0; j < n; ++j) {
            r[j] = (static_cast<double>(j) + 0.5) * dr;
            weight[j] = area * std::pow(r[j], d - 1) * dr;
            face[j] = area * std::pow((static_cast<double>(j) + 1.0) * dr, d - 1);
        }
    }

    // <u, -Lap u> with the mesh weights.
    double dirichlet(const std::vector<double>& u) const {
        double s = 0.0;
        for (std::size_t j = 0; j + 1 < n; ++j) s += face[j] * (u[j + 1] - u[j]) * (u[j + 1] - u[j]) / dr;
        s += face[n - 1] * u[n - 1] * u[n - 1] / dr;
        return s;
    }

    double integral(const std::vector<double>& f) const {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += weight[j] * f[j];
        return s;
    }

    // Solve (1 - Lap) x = b (Thomas algorithm on the weighted system).
    std::vector<double> solve_shifted(const std::vector<double>& b) const {
        std::vector<double> lower(n, 0.0), diag(n, 0.0), upper(n, 0.0), rhs(n);
        for (std::size_t j = 0; j < n; ++j) {
            const double left = j > 0 ? face[j - 1] / dr : 0.0;
            const double right = face[j] / dr;
            diag[j] = weight[j] + left + right;
            if (j > 0) lower[j] = -left;
            if (j + 1 < n) upper[j] = -right;
            rhs[j] = weight[j] * b[j];
        }
        for (std::size_t j = 1; j < n; ++j) {
            const double m = lower[j] / diag[j - 1];
            diag[j] -= m * upper[j - 1];
            rhs[j] -= m * rhs[j - 1];
        }
        std::vector<double> x(n);
        x[n - 1] = rhs[n - 1] / diag[n - 1];
        for (std::size_t j = n - 1; j-- > 0;) x[j] = (rhs[j] - upper[j] * x[j + 1]) / diag[j];
        return x;
    }
};

}  // namespace detail

// Weinstein quotient ||u||_p / (||grad u||^beta ||u||^{1-beta}) of radial samples.
inline double weinstein_quotient_radial(const detail::RadialMesh& mesh, const std::vector<double>& u, double p) {
    const double beta = mesh.d * (0.5 - 1.0 / p);
    std::vector<double> up(u.size()), u2(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) {
        up[j] = std::pow(std::abs(u[j]), p);
        u2[j] = u[j] * u[j];
    }
    const double lp = std::pow(mesh.integral(up), 1.0 / p);
    const double l2 = std::sqrt(mesh.integral(u2));
    const double grad = std::sqrt(mesh.dirichlet(u));
    return lp / (std::pow(grad, beta) * std::pow(l2, 1.0 - beta));
}

// Best constant of ||u||_p <= C ||grad u||^beta ||u||^{1-beta}, beta = d(1/2 - 1/p).
// The Weinstein quotient is maximized over radial profiles by the Petviashvili
// fixed-point ascent, whose fixed point solves -Lap Q + Q = Q^{p-1}.
inline double gn_constant(int d, double p, const GnOptions& opts = {}) {
    if (d < 3) throw ParameterError("gn_constant requires d >= 3");
    const double upper = 2.0 * d / (d - 2.0);
    if (!(p >= 2.0 && p < upper)) throw ParameterError("gn_constant requires 2 <= p < 2d/(d-2)");
    if (p == 2.0) return 1.0;
    const detail::RadialMesh mesh(d, opts.n, opts.R);
    std::vector<double> Q(mesh.n);
    for (std::size_t j = 0; j < mesh.n; ++j) Q[j] = 2.0 * std::exp(-mesh.r[j] * mesh.r[j] / 4.0);
    const double gamma = (p - 1.0) / (p - 2.0);
    double previous = 0.0;
    for (std::size_t it = 0; it < opts.max_iter; ++it) {
        std::vector<double> N(mesh.n), qn(mesh.n), q2(mesh.n);
        for (std::size_t j = 0; j < mesh.n; ++j) {
            N[j] = std::pow(std::abs(Q[j]), p - 2.0) * Q[j];
            qn[j] = Q[j] * N[j];
            q2[j] = Q[j] * Q[j];
        }
        const double lhs = mesh.dirichlet(Q) + mesh.integral(q2);
        const double stab = lhs / mesh.integral(qn);
        std::vector<double> next = mesh.solve_shifted(N);
        const double factor = std::pow(stab, gamma);
        for (auto& v : next) v *= factor;
        Q.swap(next);
        const double value = weinstein_quotient_radial(mesh, Q, p);
        if (it > 5 && std::abs(value - previous) <= opts.tol * value && std::abs(stab - 1.0) < 1e-10) return value;
        previous = value;
    }
    return previous;
}

inline double chained_constant(const ModelParams& params, double gn, double hls) {
    if (!(gn > 0.0 && hls > 0.0)) throw ParameterError("constants must be positive");
    return hls * std::pow(gn, 2.0 * params.q);
}

struct LandscapeConstants {
    double sobolev_S = 0.0;
    double hls_C = 0.0;
    double S_alpha = 0.0;
    double gn_C = 0.0;
    double chained_C = 0.0;
    double v_minus_halfd = 0.0;
    double K = 0.0;
    double a0 = 0.0;
    double rho0 = 0.0;
    double beta0 = 0.0;
};

inline void to_json(nlohmann::json& j, const LandscapeConstants& c) {
    j = nlohmann::json{{"sobolev_S", c.sobolev_S}, {"hls_C", c.hls_C},   {"S_alpha", c.S_alpha},
                       {"gn_C", c.gn_C},           {"chained_C", c.chained_C},
                       {"v_minus_halfd", c.v_minus_halfd},
                       {"K", c.K},                 {"a0", c.a0},         {"rho0", c.rho0},
                       {"beta0", c.beta0}};
}

inline void from_json(const nlohmann::json& j, LandscapeConstants& c) {
    j.at("sobolev_S").get_to(c.sobolev_S);
    j.at("hls_C").get_to(c.hls_C);
    j.at("S_alpha").get_to(c.S_alpha);
    j.at("gn_C").get_to(c.gn_C);
    j.at("chained_C").get_to(c.chained_C);
    j.at("v_minus_halfd").get_to(c.v_minus_halfd);
    j.at("K").get_to(c.K);
    j.at("a0").get_to(c.a0);
    j.at("rho0").get_to(c.rho0);
    j.at("beta0").get_to(c.beta0);
}

namespace detail {

// Coefficients and exponents of f(a, rho) = A - B a^{e2/2} rho^{(e1-2)/2} - Cc rho^{2*-1}.
struct LandscapeTerms {
    double A, B, Cc, e1, e2, ts;

    LandscapeTerms(const LandscapeConstants& c, const ModelParams& p) {
        ts = p.two_star();
        e1 = p.subcrit_scaling();
        e2 = 2.0 * p.q - e1;
        A = 0.5 * (1.0 - c.v_minus_halfd / c.sobolev_S);
        B = c.chained_C / (2.0 * p.q);
        Cc = 1.0 / (2.0 * ts * std::pow(c.S_alpha, ts));
    }

    double denominator() const { return 2.0 * ts - e1; }

    // rho_a = bracket^{2/D} a^{e2/D}.
    double bracket(const LandscapeConstants& c, const ModelParams& p) const {
        return ts * (2.0 - p.alpha - p.d * (p.q - 2.0)) * c.chained_C * std::pow(c.S_alpha, ts) /
               (2.0 * p.q * (ts - 1.0));
    }
};

}  // namespace detail

inline double f_value(double a, double rho, const LandscapeConstants& c, const ModelParams& params) {
    const detail::LandscapeTerms t(c, params);
    return t.A - t.B * std::pow(a, t.e2 / 2.0) * std::pow(rho, (t.e1 - 2.0) / 2.0) - t.Cc * std::pow(rho, t.ts - 1.0);
}

inline double f_prime(double a, double rho, const LandscapeConstants& c, const ModelParams& params) {
    const detail::LandscapeTerms t(c, params);
    return -t.B * std::pow(a, t.e2 / 2.0) * (t.e1 - 2.0) / 2.0 * std::pow(rho, (t.e1 - 4.0) / 2.0) -
           t.Cc * (t.ts - 1.0) * std::pow(rho, t.ts - 2.0);
}

inline double rho_max(double a, const LandscapeConstants& c, const ModelParams& params) {
    const detail::LandscapeTerms t(c, params);
    const double D = t.denominator();
    return std::pow(t.bracket(c, params), 2.0 / D) * std::pow(a, t.e2 / D);
}

inline double K_const(const LandscapeConstants& c, const ModelParams& params) {
    const detail::LandscapeTerms t(c, params);
    const double D = t.denominator();
    const double br = t.bracket(c, params);
    return t.B * std::pow(br, (t.e1 - 2.0) / D) + t.Cc * std::pow(br, 2.0 * (t.ts - 1.0) / D);
}

// Mass at which max_rho f_a vanishes: max f_a = A - K a^{(d+2-alpha)/d}.
inline double a0(const LandscapeConstants& c, const ModelParams& params) {
    const detail::LandscapeTerms t(c, params);
    return std::pow(t.A / K_const(c, params), params.d / (params.d + 2.0 - params.alpha));
}

inline double beta0(const LandscapeConstants& c, const ModelParams& params) {
    const detail::LandscapeTerms t(c, params);
    return t.A - t.Cc * std::pow(c.rho0, t.ts - 1.0);
}

inline double max_value_formula(double a, const LandscapeConstants& c, const ModelParams& params) {
    const detail::LandscapeTerms t(c, params);
    return t.A - K_const(c, params) * std::pow(a, (params.d + 2.0 - params.alpha) / params.d);
}

struct LandscapeMax {
    double rho = 0.0;
    double value = 0.0;
};

// Golden-section maximization of f(a, .) over [rho_a/10, 10 rho_a] in log rho.
inline LandscapeMax maximize_f(double a, const LandscapeConstants& c, const ModelParams& params) {
    const double center = rho_max(a, c, params);
    double lo = std::log(center / 10.0), hi = std::log(center * 10.0);
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    auto fv = [&](double t) { return f_value(a, std::exp(t), c, params); };
    double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
    double f1 = fv(x1), f2 = fv(x2);
    while (hi - lo > 1e-12) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + invphi * (hi - lo);
            f2 = fv(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - invphi * (hi - lo);
            f1 = fv(x1);
        }
    }
    const double t = 0.5 * (lo + hi);
    return {std::exp(t), fv(t)};
}

// Assembles every constant from computed 𝒮, C(d,alpha), C_{d,p} and the injected ||V_-||_{d/2}.
inline LandscapeConstants compute_constants(const ModelParams& params, double v_minus_halfd = 0.0,
                                            const GnOptions& gn_opts = {}) {
    params.validate();
    LandscapeConstants c;
    c.sobolev_S = sobolev_constant(params.d);
    c.hls_C = hls_constant(params.d, params.alpha);
    c.S_alpha = c.sobolev_S * std::pow(c.hls_C, -1.0 / params.two_star());
    const double p = 2.0 * params.d * params.q / (2.0 * params.d - params.alpha);
    c.gn_C = gn_constant(params.d, p, gn_opts);
    c.chained_C = chained_constant(params, c.gn_C, c.hls_C);
    if (v_minus_halfd < 0.0) throw ParameterError("negative-part norm must be nonnegative");
    if (v_minus_halfd > c.sobolev_S) throw ParameterError("||V_-||_{d/2} exceeds the Sobolev constant");
    c.v_minus_halfd = v_minus_halfd;
    c.K = K_const(c, params);
    c.a0 = a0(c, params);
    c.rho0 = rho_max(c.a0, c, params);
    c.beta0 = beta0(c, params);
    return c;
}

struct TrichotomyReport {
    double below = 0.0, at = 0.0, above = 0.0;  // max f at 0.5 a0, a0, 2 a0
    bool below_pass = false, at_pass = false, above_pass = false;
    bool passed() const { return below_pass && at_pass && above_pass; }
};

inline void to_json(nlohmann::json& j, const TrichotomyReport& r) {
    j = nlohmann::json{{"max_f_half_a0", r.below}, {"max_f_a0", r.at},        {"max_f_two_a0", r.above},
                       {"half_a0_positive", r.below_pass}, {"a0_zero", r.at_pass}, {"two_a0_negative", r.above_pass}};
}

inline TrichotomyReport trichotomy(const LandscapeConstants& c, const ModelParams& params) {
    TrichotomyReport r;
    r.below = maximize_f(0.5 * c.a0, c, params).value;
    r.at = maximize_f(c.a0, c, params).value;
    r.above = maximize_f(2.0 * c.a0, c, params).value;
    r.below_pass = r.below > 1e-6;
    r.at_pass = std::abs(r.at) < 1e-9;
    r.above_pass = r.above < -1e-6;
    return r;
}

struct SignPropagationReport {
    double min_value = 0.0;
    double argmin_rho = 0.0;
    bool passed = false;
};

// f(a2, .) >= 0 on [a2 rho1 / a1, rho1] whenever f(a1, rho1) >= 0 and a2 <= a1.
inline SignPropagationReport sign_propagation_check(double a1, double rho1, double a2, std::size_t samples,
                                                    const LandscapeConstants& c, const ModelParams& params) {
    if (!(a1 > 0.0 && rho1 > 0.0 && a2 > 0.0 && a2 <= a1)) throw ParameterError("requires 0 < a2 <= a1, rho1 > 0");
    if (f_value(a1, rho1, c, params) < 0.0) throw ParameterError("requires f(a1, rho1) >= 0");
    if (samples < 1) throw ParameterError("need at least one sample");
    const double lo = a2 * rho1 / a1;
    SignPropagationReport r;
    r.min_value = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < samples; ++i) {
        const double t = samples == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(samples - 1);
        const double rho = lo + t * (rho1 - lo);
        const double v = f_value(a2, rho, c, params);
        if (v < r.min_value) {
            r.min_value = v;
            r.argmin_rho = rho;
        }
    }
    r.passed = r.min_value >= -1e-12;
    return r;
}

// Grid quotient |<K*h, h>| / ||h||_{2d/(2d-alpha)}^2 on h = (gamma^2 + |x|^2)^{-(2d-alpha)/2}.
inline double hls_grid_quotient(const Grid& g, double alpha, double gamma = 1.0) {
    const double expo = -(2.0 * g.d - alpha) / 2.0;
    RealVec h(g.size());
    for_each_node(g, [&](std::size_t i, const std::array<double, 3>& x) {
        h[i] = std::pow(gamma * gamma + x[0] * x[0] + x[1] * x[1] + x[2] * x[2], expo);
    });
    const RealVec conv = kernel_convolve_real(g, h, alpha);
    double s = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) s += conv[i] * h[i];
    s *= g.cell();
    const double r = 2.0 * g.d / (2.0 * g.d - alpha);
    const double norm = lp_norm_real(g, h, r);
    return std::abs(s) / (norm * norm);
}

}  // namespace choquard
