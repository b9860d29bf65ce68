#pragma once

#include <cmath>
#include <cstdio>
#include <deque>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "energy.hpp"
#include "landscape.hpp"
#include "potential.hpp"

namespace choquard {

struct GroundStateOptions {
    double tol = 1e-8;              // H1 norm of the projected gradient
    std::size_t max_iter = 3000;
    double stall_tol = 1e-12;       // relative energy change over stall_window accepted steps
    std::size_t stall_window = 10;
    double tau_initial = 1.0;
    double tau_max = 2.0;
    double tau_min = 1e-14;
    double armijo = 1e-4;
    double coercivity_slack = 1e-9;
    std::optional<Field> initial;
};

struct GroundStateResult {
    Field u_a;
    double m_a = 0.0;
    double lambda = 0.0;
    double grad_residual = 0.0;
    double rho_attained = 0.0;
    std::size_t iterations = 0;
    LandscapeConstants constants_stamp;

    std::string stop_reason;
    EnergyBreakdown breakdown;
    std::vector<double> energy_history;       // accepted iterates, starting with the initial datum
    double coercivity_min_slack = std::numeric_limits<double>::infinity();
    std::size_t coercivity_violations = 0;
    std::size_t rejected_ball = 0;            // trial steps leaving B_rho0
    std::size_t rejected_armijo = 0;
    double boundary_amplitude = 0.0;          // max |u| on the box faces over max |u|
};

inline void to_json(nlohmann::json& j, const GroundStateResult& r) {
    j = nlohmann::json{{"m_a", r.m_a},
                       {"lambda", r.lambda},
                       {"grad_residual", r.grad_residual},
                       {"rho_attained", r.rho_attained},
                       {"mass", mass(r.u_a)},
                       {"iterations", r.iterations},
                       {"stop_reason", r.stop_reason},
                       {"energy", r.breakdown},
                       {"coercivity_min_slack", r.coercivity_min_slack},
                       {"coercivity_violations", r.coercivity_violations},
                       {"rejected_ball", r.rejected_ball},
                       {"rejected_armijo", r.rejected_armijo},
                       {"boundary_amplitude", r.boundary_amplitude},
                       {"constants", r.constants_stamp}};
}

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, Field last, double residual, std::size_t iterations)
        : Error(what), last_(std::move(last)), residual_(residual), iterations_(iterations) {}
    const Field& last_iterate() const { return last_; }
    double residual() const { return residual_; }
    std::size_t iterations() const { return iterations_; }

private:
    Field last_;
    double residual_;
    std::size_t iterations_;
};

inline void normalize_mass(Field& u, double a) {
    const double m = mass(u);
    if (!(m > 0.0)) throw ParameterError("cannot normalize a vanishing field");
    const double scale = std::sqrt(a / m);
    for (auto& v : u.values) v *= scale;
}

// c exp(-|x - x0|^2 / (2 w^2)) scaled to discrete mass a.
inline Field gaussian_state(const Grid& g, double a, double width, const std::array<double, 3>& center = {0, 0, 0}) {
    Field u = field_from(g, [&](const std::array<double, 3>& x) {
        double r2 = 0.0;
        for (int i = 0; i < 3; ++i) r2 += (x[i] - center[i]) * (x[i] - center[i]);
        return cplx(std::exp(-r2 / (2.0 * width * width)), 0.0);
    });
    normalize_mass(u, a);
    return u;
}

// Largest |u| on the box boundary (the planes x_i = -L) relative to max |u|.
inline double boundary_amplitude(const Field& u) {
    const Grid& g = u.grid;
    double face = 0.0, peak = 0.0;
    const std::size_t n = g.n;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double m = std::abs(u[i]);
        peak = std::max(peak, m);
        std::size_t rest = i;
        bool on_face = false;
        for (int a = 0; a < g.d; ++a) {
            const std::size_t c = rest % n;
            rest /= n;
            on_face = on_face || c == 0;
        }
        if (on_face) face = std::max(face, m);
    }
    return peak > 0.0 ? face / peak : 0.0;
}

namespace detail {

struct DescentState {
    Field u;
    ComplexVec spec;
    Nonlocal nl;
    double grad_sq = 0.0;
    double pot = 0.0;
    EnergyBreakdown e;
};

inline DescentState evaluate_state(Field u, const Field* V, const ModelParams& params,
                                   std::optional<ComplexVec> spec = std::nullopt) {
    DescentState s;
    s.spec = spec ? std::move(*spec) : spectrum(u);
    s.grad_sq = gradient_norm_sq_from_spectrum(u.grid, s.spec);
    s.nl = nonlocal_terms(u, params);
    s.pot = V ? potential_pairing(u, *V) : 0.0;
    s.e = assemble_energy(s.grad_sq, s.pot, s.nl.dq, s.nl.dcrit, params);
    s.u = std::move(u);
    return s;
}

// Initial Gaussian width: minimize I over the Gaussian dilation family, starting
// from |grad u|^2 = rho_a / 4 and staying inside B_rho0 and above the grid scale.
inline double initial_width(double a, const Field* V, const ModelParams& params, const LandscapeConstants& c,
                            const Grid& g) {
    const double d = g.d;
    const double rho_start = rho_max(a, c, params) / 4.0;
    const double w_start = std::sqrt(d * a / (2.0 * rho_start));
    const double w_min = std::max(2.0 * g.h(), std::sqrt(d * a / (2.0 * 0.5 * c.rho0)));
    const double w_max = g.L / 4.0;
    const double w0 = std::clamp(w_start, w_min, w_max);
    const Field base = gaussian_state(g, a, w0);
    const FiberMap fiber(base, params);
    auto cost = [&](double logw) {
        const double w = std::exp(logw);
        double e = fiber(w0 / w);
        if (V) e += 0.5 * potential_pairing(gaussian_state(g, a, w), *V);
        return e;
    };
    double lo = std::log(w_min), hi = std::log(w_max);
    if (!(lo < hi)) return w0;
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
    double f1 = cost(x1), f2 = cost(x2);
    while (hi - lo > 1e-3) {
        if (f1 > f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + invphi * (hi - lo);
            f2 = cost(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - invphi * (hi - lo);
            f1 = cost(x1);
        }
    }
    return std::exp(0.5 * (lo + hi));
}

inline GroundStateResult find_ground_state_impl(double a, const Field* V, const ModelParams& params,
                                                const LandscapeConstants& c, const Grid& g,
                                                const GroundStateOptions& opts) {
    params.validate();
    if (g.d != params.d) throw GridMismatch("grid dimension differs from model dimension");
    if (!(a > 0.0)) throw ParameterError("mass must be positive");
    if (a >= c.a0) throw ParameterError("above threshold a0");
    if (V) require_same_grid(V->grid, g);

    Field start = opts.initial ? *opts.initial : gaussian_state(g, a, initial_width(a, V, params, c, g));
    require_same_grid(start.grid, g);
    normalize_mass(start, a);
    DescentState cur = evaluate_state(std::move(start), V, params);
    if (cur.grad_sq >= c.rho0) throw ParameterError("initial datum lies outside B_rho0");

    GroundStateResult res;
    res.constants_stamp = c;
    res.energy_history.push_back(cur.e.total);
    auto check_coercivity = [&](const DescentState& s) {
        const double bound = s.grad_sq * f_value(a, s.grad_sq, c, params);
        const double slack = s.e.total - bound;
        res.coercivity_min_slack = std::min(res.coercivity_min_slack, slack);
        if (slack < -opts.coercivity_slack) ++res.coercivity_violations;
    };
    check_coercivity(cur);

    const auto k2 = detail::k2_table(g);
    const double inv_n = 1.0 / static_cast<double>(g.size());
    double tau = opts.tau_initial;
    std::deque<double> recent{cur.e.total};
    for (std::size_t it = 0;; ++it) {
        const double lambda = (cur.grad_sq + cur.pot - cur.nl.dq - cur.nl.dcrit) / a;
        // Projected gradient g = -Lap u + V u - w u - lambda u, assembled in Fourier space.
        ComplexVec rest(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double pot = V ? (*V)[i].real() : 0.0;
            rest[i] = (pot - cur.nl.coefficient[i] - lambda) * cur.u[i];
        }
        fft_forward(g, rest.data());
        ComplexVec grad_spec(g.size());
        double residual_sq = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            grad_spec[i] = (*k2)[i] * cur.spec[i] + rest[i];
            residual_sq += (1.0 + (*k2)[i]) * std::norm(grad_spec[i]);
        }
        const double residual = std::sqrt(residual_sq * g.cell() * inv_n);
        res.lambda = lambda;
        res.grad_residual = residual;
        res.iterations = it;

        std::string stop;
        if (residual <= opts.tol) stop = "residual";
        else if (recent.size() > opts.stall_window &&
                 std::abs(recent.front() - recent.back()) <= opts.stall_tol * std::abs(recent.back()))
            stop = "energy_stall";
        if (!stop.empty()) {
            res.stop_reason = stop;
            break;
        }
        if (it >= opts.max_iter) {
            char msg[128];
            std::snprintf(msg, sizeof msg, "ground state did not converge in %zu iterations (residual %.3e)",
                          opts.max_iter, residual);
            throw ConvergenceError(msg, cur.u, residual, it);
        }

        // Semi-implicit step: backward Euler on the shifted Laplacian,
        // u <- normalize(u - tau (sigma - Lap)^{-1} g).
        const double sigma = std::max(std::abs(lambda), 1e-8);
        ComplexVec dir(grad_spec);
        double slope = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            dir[i] /= (sigma + (*k2)[i]);
            slope += std::real(std::conj(grad_spec[i]) * dir[i]);
        }
        slope *= g.cell() * inv_n;
        fft_backward(g, dir.data());
        for (auto& v : dir) v *= inv_n;

        bool accepted = false;
        while (!accepted) {
            if (tau < opts.tau_min)
                throw ConvergenceError("step size underflow in ground-state descent", cur.u, residual, it);
            Field trial(g);
            for (std::size_t i = 0; i < g.size(); ++i) trial[i] = cur.u[i] - tau * dir[i];
            const double tmass = mass(trial);
            if (!std::isfinite(tmass) || !(tmass > 0.0)) {
                ++res.rejected_armijo;
                tau *= 0.5;
                continue;
            }
            normalize_mass(trial, a);
            ComplexVec tspec = spectrum(trial);
            const double tgrad = gradient_norm_sq_from_spectrum(g, tspec);
            if (!(tgrad < c.rho0)) {
                ++res.rejected_ball;
                tau *= 0.5;
                continue;
            }
            DescentState next = evaluate_state(std::move(trial), V, params, std::move(tspec));
            if (next.e.total > cur.e.total - opts.armijo * tau * slope) {
                ++res.rejected_armijo;
                tau *= 0.5;
                continue;
            }
            cur = std::move(next);
            accepted = true;
        }
        check_coercivity(cur);
        res.energy_history.push_back(cur.e.total);
        recent.push_back(cur.e.total);
        if (recent.size() > opts.stall_window + 1) recent.pop_front();
        tau = std::min(1.3 * tau, opts.tau_max);
    }

    res.m_a = cur.e.total;
    res.breakdown = cur.e;
    res.rho_attained = cur.grad_sq;
    res.boundary_amplitude = boundary_amplitude(cur.u);
    res.u_a = std::move(cur.u);
    return res;
}

}  // namespace detail

// Local minimizer of I on S(a) intersected with B_rho0 by normalized gradient flow.
inline GroundStateResult find_ground_state(double a, const ModelParams& params, const LandscapeConstants& c,
                                           const Grid& g, const GroundStateOptions& opts = {}) {
    return detail::find_ground_state_impl(a, nullptr, params, c, g, opts);
}

inline GroundStateResult find_ground_state(double a, const Potential& V, const ModelParams& params,
                                           const LandscapeConstants& c, const Grid& g,
                                           const GroundStateOptions& opts = {}) {
    if (V.is_zero()) return detail::find_ground_state_impl(a, nullptr, params, c, g, opts);
    const Field samples = sample(V, g);
    return detail::find_ground_state_impl(a, &samples, params, c, g, opts);
}

struct MCurvePoint {
    double a = 0.0;
    double m = 0.0;
    double lambda = 0.0;
    double rho = 0.0;
    double residual = 0.0;
    std::size_t iterations = 0;
    bool warm_started = false;
};

inline void to_json(nlohmann::json& j, const MCurvePoint& p) {
    j = nlohmann::json{{"a", p.a},           {"m", p.m},
                       {"lambda", p.lambda}, {"rho", p.rho},
                       {"residual", p.residual}, {"iterations", p.iterations},
                       {"warm_started", p.warm_started}};
}

// m(a) along the samples, warm-starting each solve from sqrt(a / a_prev) u_prev.
inline std::vector<MCurvePoint> m_curve(const std::vector<double>& a_samples, const Potential& V,
                                        const ModelParams& params, const LandscapeConstants& c, const Grid& g,
                                        const GroundStateOptions& opts = {}) {
    for (double a : a_samples)
        if (!(a > 0.0 && a < c.a0)) throw ParameterError("m_curve samples must lie in (0, a0)");
    std::vector<MCurvePoint> out;
    std::optional<Field> previous;
    double a_prev = 0.0;
    for (double a : a_samples) {
        GroundStateOptions o = opts;
        bool warm = false;
        if (previous) {
            Field y = *previous;
            const double scale = std::sqrt(a / a_prev);
            for (auto& v : y.values) v *= scale;
            if (gradient_norm_sq(y) < c.rho0) {
                o.initial = std::move(y);
                warm = true;
            }
        }
        GroundStateResult r = find_ground_state(a, V, params, c, g, o);
        out.push_back({a, r.m_a, r.lambda, r.rho_attained, r.grad_residual, r.iterations, warm});
        previous = std::move(r.u_a);
        a_prev = a;
    }
    return out;
}

struct BoundaryReport {
    std::vector<double> energies;
    double min_energy = 0.0;
    double lower_bound = 0.0;  // rho0 f(a, rho0)
    double min_slack = 0.0;    // min over samples of I - lower_bound
    bool all_positive = false;
    bool bound_respected = false;
    bool passed() const { return all_positive && bound_respected; }
};

inline void to_json(nlohmann::json& j, const BoundaryReport& r) {
    j = nlohmann::json{{"samples", r.energies.size()}, {"min_energy", r.min_energy},
                       {"lower_bound", r.lower_bound}, {"min_slack", r.min_slack},
                       {"all_positive", r.all_positive}, {"bound_respected", r.bound_respected},
                       {"passed", r.passed()}};
}

// Random states of mass a on the sphere |grad u|^2 = rho0. Each is a sum of
// Gaussian bumps with random centres, widths and complex amplitudes, dilated
// analytically and tuned by secant iteration on the dilation factor.
inline BoundaryReport boundary_energy_check(double a, const Potential& V, const ModelParams& params,
                                            const LandscapeConstants& c, const Grid& g, std::size_t samples = 32,
                                            std::uint64_t seed = 1) {
    if (!(a > 0.0 && a < c.a0)) throw ParameterError("boundary check requires 0 < a < a0");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Field Vs = sample(V, g);
    BoundaryReport rep;
    rep.lower_bound = c.rho0 * f_value(a, c.rho0, c, params);
    const double target_width = std::sqrt(g.d * a / (2.0 * c.rho0));
    if (target_width < 1.5 * g.h())
        throw ParameterError("boundary states of width " + std::to_string(target_width) +
                             " are not resolved by grid spacing " + std::to_string(g.h()));
    for (std::size_t k = 0; k < samples; ++k) {
        struct Bump {
            std::array<double, 3> x;
            double w;
            cplx amp;
        };
        std::vector<Bump> bumps(1 + rng() % 3);
        for (auto& b : bumps) {
            for (auto& xi : b.x) xi = (unit(rng) - 0.5) * 2.0 * target_width;
            b.w = target_width * (0.5 + unit(rng));
            b.amp = std::polar(0.3 + unit(rng), 2.0 * std::numbers::pi * unit(rng));
        }
        auto make = [&](double s) {
            Field u = field_from(g, [&](const std::array<double, 3>& x) {
                cplx v{};
                for (const auto& b : bumps) {
                    double r2 = 0.0;
                    for (int i = 0; i < g.d; ++i) r2 += (s * x[i] - b.x[i]) * (s * x[i] - b.x[i]);
                    v += b.amp * std::exp(-r2 / (2.0 * b.w * b.w));
                }
                return v;
            });
            normalize_mass(u, a);
            return u;
        };
        auto rho_of = [&](double s) { return gradient_norm_sq(make(s)); };
        // rho scales like s^2; refine with secant steps in log s.
        double s0 = 1.0, r0 = rho_of(s0);
        double s1 = std::sqrt(c.rho0 / r0), r1 = rho_of(s1);
        for (int it = 0; it < 20 && std::abs(r1 - c.rho0) > 1e-13 * c.rho0; ++it) {
            const double l0 = std::log(s0), l1 = std::log(s1);
            const double g0 = std::log(r0 / c.rho0), g1 = std::log(r1 / c.rho0);
            const double l2 = g1 != g0 ? l1 - g1 * (l1 - l0) / (g1 - g0) : l1 - 0.5 * g1;
            s0 = s1;
            r0 = r1;
            s1 = std::exp(l2);
            r1 = rho_of(s1);
        }
        const Field u = make(s1);
        rep.energies.push_back(energy(u, Vs, params).total);
    }
    rep.min_energy = *std::min_element(rep.energies.begin(), rep.energies.end());
    rep.min_slack = rep.min_energy - rep.lower_bound;
    rep.all_positive = rep.min_energy > 0.0;
    rep.bound_respected = true;
    for (double e : rep.energies) rep.bound_respected = rep.bound_respected && e >= rep.lower_bound - 1e-9;
    return rep;
}

}  // namespace choquard
