#pragma once

#include <cmath>
#include <iostream>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "params.hpp"
#include "spectral.hpp"

namespace choquard {

struct EnergyBreakdown {
    double kinetic = 0.0;
    double potential = 0.0;
    double subcrit = 0.0;
    double crit = 0.0;
    double total = 0.0;
};

inline void to_json(nlohmann::json& j, const EnergyBreakdown& e) {
    j = nlohmann::json{{"kinetic", e.kinetic},
                       {"potential", e.potential},
                       {"subcrit", e.subcrit},
                       {"crit", e.crit},
                       {"total", e.total}};
}

struct MassConstraint {
    double a;
    explicit MassConstraint(double a_) : a(a_) {
        if (!(a > 0.0)) throw ParameterError("mass must be positive");
    }
};

// D_p(u) = h^d sum (|x|^{-alpha} * |u|^p) |u|^p.
inline double choquard_term(const Field& u, double p, double alpha) {
    if (!(p >= 1.0)) throw ParameterError("choquard_term requires p >= 1");
    const Grid& g = u.grid;
    const RealVec f = modulus_power(u, p);
    const RealVec conv = kernel_convolve_real(g, f, alpha);
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += conv[i] * f[i];
    return s * g.cell();
}

// Both nonlocal terms of a state plus the pointwise coefficient
// w = (K*|u|^q)|u|^{q-2} + (K*|u|^{2*})|u|^{2*-2}, so that the force is w u.
struct Nonlocal {
    double dq = 0.0;
    double dcrit = 0.0;
    RealVec coefficient;
};

inline Nonlocal nonlocal_terms(const Field& u, const ModelParams& params, bool want_coefficient = true) {
    const Grid& g = u.grid;
    const std::size_t N = g.size();
    Nonlocal out;
    if (want_coefficient) out.coefficient.assign(N, 0.0);
    RealVec m2(N);
    for (std::size_t i = 0; i < N; ++i) m2[i] = std::norm(u[i]);
    const double exps[2] = {params.q, params.two_star()};
    RealVec f(N);
    for (int t = 0; t < 2; ++t) {
        const double p = exps[t];
        for (std::size_t i = 0; i < N; ++i) f[i] = detail::power_from_norm(m2[i], p);
        const RealVec conv = kernel_convolve_real(g, f, params.alpha);
        double s = 0.0;
        for (std::size_t i = 0; i < N; ++i) s += conv[i] * f[i];
        (t == 0 ? out.dq : out.dcrit) = s * g.cell();
        if (want_coefficient)
            for (std::size_t i = 0; i < N; ++i)
                if (m2[i] > 0.0) out.coefficient[i] += conv[i] * f[i] / m2[i];
    }
    return out;
}

inline double potential_pairing(const Field& u, const Field& v) {
    require_same_grid(u.grid, v.grid);
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += v[i].real() * std::norm(u[i]);
    return s * u.grid.cell();
}

inline EnergyBreakdown assemble_energy(double grad_sq, double pot, double dq, double dcrit, const ModelParams& params) {
    EnergyBreakdown e;
    e.kinetic = 0.5 * grad_sq;
    e.potential = 0.5 * pot;
    e.subcrit = dq / (2.0 * params.q);
    e.crit = dcrit / (2.0 * params.two_star());
    e.total = e.kinetic + e.potential - e.subcrit - e.crit;
    return e;
}

// I(u) with V = 0.
inline EnergyBreakdown energy(const Field& u, const ModelParams& params) {
    const Nonlocal nl = nonlocal_terms(u, params, false);
    return assemble_energy(gradient_norm_sq(u), 0.0, nl.dq, nl.dcrit, params);
}

// I(u) with the potential given by its samples V on u's grid.
inline EnergyBreakdown energy(const Field& u, const Field& V, const ModelParams& params) {
    require_same_grid(u.grid, V.grid);
    const Nonlocal nl = nonlocal_terms(u, params, false);
    return assemble_energy(gradient_norm_sq(u), potential_pairing(u, V), nl.dq, nl.dcrit, params);
}

namespace detail {

inline Field energy_gradient_impl(const Field& u, const Field* V, const ModelParams& params) {
    const Grid& g = u.grid;
    const Nonlocal nl = nonlocal_terms(u, params);
    Field G = laplacian(u);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double pot = V ? (*V)[i].real() : 0.0;
        G[i] = -G[i] + (pot - nl.coefficient[i]) * u[i];
    }
    return G;
}

}  // namespace detail

// L2 gradient I'(u) = -Lap u + V u - w u, so that dI(u)[phi] = Re <I'(u), phi>.
inline Field energy_gradient(const Field& u, const ModelParams& params) {
    return detail::energy_gradient_impl(u, nullptr, params);
}

inline Field energy_gradient(const Field& u, const Field& V, const ModelParams& params) {
    require_same_grid(u.grid, V.grid);
    return detail::energy_gradient_impl(u, &V, params);
}

namespace detail {

// Periodic band-limited interpolation kernel for n nodes with the Nyquist
// mode split symmetrically, evaluated at offset t.
inline double dirichlet_kernel(const Grid& g, double t) {
    const std::size_t half = g.n / 2;
    const double w = std::numbers::pi * t / g.L;
    double s = 1.0 + std::cos(static_cast<double>(half) * w);
    for (std::size_t m = 1; m < half; ++m) s += 2.0 * std::cos(static_cast<double>(m) * w);
    return s / static_cast<double>(g.n);
}

// Applies the n x n matrix M along one axis of the field.
inline void apply_along_axis(const Grid& g, const std::vector<double>& M, int axis, ComplexVec& data) {
    const std::size_t n = g.n;
    std::size_t stride = 1;
    for (int a = axis + 1; a < g.d; ++a) stride *= n;
    const std::size_t outer = g.size() / (stride * n);
    std::vector<cplx> line(n), res(n);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < stride; ++in) {
            const std::size_t base = o * stride * n + in;
            for (std::size_t j = 0; j < n; ++j) line[j] = data[base + j * stride];
            for (std::size_t j = 0; j < n; ++j) {
                cplx acc{};
                const double* row = &M[j * n];
                for (std::size_t l = 0; l < n; ++l) acc += row[l] * line[l];
                res[j] = acc;
            }
            for (std::size_t j = 0; j < n; ++j) data[base + j * stride] = res[j];
        }
}

}  // namespace detail

struct Dilation {
    Field field;
    double tail_fraction = 0.0;
    bool under_resolved = false;
};

inline constexpr double dilation_tail_tolerance = 1e-8;

// u_s(x) = s^{d/2} u(s x) by trigonometric interpolation on the same grid,
// with the spectral tail of the result reported as a resolution diagnostic.
inline Dilation dilate_checked(const Field& u, double s) {
    if (!(s > 0.0)) throw ParameterError("dilation factor must be positive");
    const Grid& g = u.grid;
    Dilation out;
    out.field = u;
    if (s != 1.0) {
        std::vector<double> M(g.n * g.n);
        // Nodes whose preimage s x leaves the box get zero, not a periodic copy of u.
        for (std::size_t j = 0; j < g.n; ++j) {
            const double y = s * g.coord(j);
            if (y < -g.L || y >= g.L) continue;
            for (std::size_t l = 0; l < g.n; ++l) M[j * g.n + l] = detail::dirichlet_kernel(g, y - g.coord(l));
        }
        for (int axis = 0; axis < g.d; ++axis) detail::apply_along_axis(g, M, axis, out.field.values);
        const double amp = std::pow(s, g.d / 2.0);
        for (auto& v : out.field.values) v *= amp;
    }
    out.tail_fraction = spectral_tail_fraction(out.field);
    out.under_resolved = out.tail_fraction > dilation_tail_tolerance;
    return out;
}

inline Field dilate(const Field& u, double s) {
    Dilation r = dilate_checked(u, s);
    if (r.under_resolved)
        std::clog << "warning: dilation by " << s << " leaves spectral tail " << r.tail_fraction << '\n';
    return std::move(r.field);
}

struct PsiValue {
    double value = 0.0;
    bool resampled = false;
};

// psi_u(s) = I(u_s) for V = 0 through the exact scaling law of each term.
class FiberMap {
public:
    FiberMap(const Field& u, const ModelParams& params) : params_(params) {
        grad_sq_ = gradient_norm_sq(u);
        const Nonlocal nl = nonlocal_terms(u, params, false);
        dq_ = nl.dq;
        dcrit_ = nl.dcrit;
    }

    double operator()(double s) const {
        const double ps = params_.two_star();
        return 0.5 * s * s * grad_sq_ - std::pow(s, params_.subcrit_scaling()) * dq_ / (2.0 * params_.q) -
               std::pow(s, 2.0 * ps) * dcrit_ / (2.0 * ps);
    }

    double grad_sq() const { return grad_sq_; }
    double dq() const { return dq_; }
    double dcrit() const { return dcrit_; }

private:
    ModelParams params_;
    double grad_sq_ = 0.0, dq_ = 0.0, dcrit_ = 0.0;
};

inline PsiValue psi(const Field& u, double s, const ModelParams& params) {
    return {FiberMap(u, params)(s), false};
}

// Potential present: the potential term has no scaling law, so resample.
inline PsiValue psi(const Field& u, double s, const ModelParams& params, const Field& V) {
    return {energy(dilate(u, s), V, params).total, true};
}

}  // namespace choquard
