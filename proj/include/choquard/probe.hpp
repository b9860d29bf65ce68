#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dynamics.hpp"
#include "potential.hpp"

namespace choquard {

struct AdmissiblePair {
    double m = std::numeric_limits<double>::infinity();  // time exponent
    double n = 2.0;                                      // space exponent

    double defect(int d) const {
        const double tm = std::isinf(m) ? 0.0 : 2.0 / m;
        const double sn = std::isinf(n) ? 0.0 : d / n;
        return tm + sn - 0.5 * d;
    }
    bool admissible(int d) const { return m >= 2.0 && n >= 2.0 && std::abs(defect(d)) <= 1e-12; }
};

inline void to_json(nlohmann::json& j, const AdmissiblePair& p) {
    auto num = [](double v) { return std::isinf(v) ? nlohmann::json("inf") : nlohmann::json(v); };
    j = nlohmann::json{{"m", num(p.m)}, {"n", num(p.n)}};
}

// (2 beta, 2 d beta / (d beta - 2)) for a nonlinearity exponent beta.
inline AdmissiblePair pair_for_exponent(int d, double beta) {
    return {2.0 * beta, 2.0 * d * beta / (d * beta - 2.0)};
}

// The pairs built from q and from 2*.
inline std::pair<AdmissiblePair, AdmissiblePair> admissible_pairs(const ModelParams& params) {
    params.validate();
    const AdmissiblePair p1 = pair_for_exponent(params.d, params.q);
    const AdmissiblePair p2 = pair_for_exponent(params.d, params.two_star());
    for (const auto& p : {p1, p2})
        if (!p.admissible(params.d))
            throw Error("admissibility identity violated: defect " + std::to_string(p.defect(params.d)));
    return {p1, p2};
}

struct MixedNormSpec {
    std::vector<AdmissiblePair> pairs;
    double T = 1.0;
    bool with_derivative = false;  // W^{1,n} instead of L^n in space

    void validate() const {
        if (!(T > 0.0)) throw ParameterError("mixed norm horizon must be positive");
        if (pairs.empty()) throw ParameterError("mixed norm needs at least one pair");
    }
};

// Uniformly sampled trajectory t_j = j dt.
struct Trajectory {
    std::vector<double> times;
    std::vector<Field> states;
};

inline double spatial_norm(const Field& u, double n, bool with_derivative) {
    double s = lp_norm(u, n);
    if (with_derivative) s += lp_norm_real(u.grid, gradient_modulus(u), n);
    return s;
}

// ||u||_{L^m_T X^n} per pair, trapezoid in time over the samples in [0, T].
inline std::vector<double> mixed_norm(const Trajectory& traj, const MixedNormSpec& spec) {
    spec.validate();
    if (traj.states.empty() || traj.states.size() != traj.times.size())
        throw ParameterError("mixed norm of an empty trajectory");
    const std::size_t count = traj.times.size();
    if (count < 2) throw ParameterError("mixed norm needs at least two time samples");
    const double dt = traj.times[1] - traj.times[0];
    for (std::size_t j = 1; j < count; ++j)
        if (std::abs(traj.times[j] - traj.times[0] - j * dt) > 1e-9 * std::max(1.0, traj.times.back()))
            throw ParameterError("mixed norm requires uniform time sampling");
    const double steps = (spec.T - traj.times[0]) / dt;
    const std::size_t last = static_cast<std::size_t>(std::llround(steps));
    if (std::abs(steps - static_cast<double>(last)) > 1e-6 || last == 0 || last >= count)
        throw ParameterError("horizon T must coincide with a sample time of the trajectory");

    std::vector<double> out;
    for (const auto& p : spec.pairs) {
        std::vector<double> s(last + 1);
        for (std::size_t j = 0; j <= last; ++j) s[j] = spatial_norm(traj.states[j], p.n, spec.with_derivative);
        if (std::isinf(p.m)) {
            out.push_back(*std::max_element(s.begin(), s.end()));
            continue;
        }
        double acc = 0.0;
        for (std::size_t j = 0; j <= last; ++j) {
            const double w = (j == 0 || j == last) ? 0.5 : 1.0;
            acc += w * std::pow(s[j], p.m);
        }
        out.push_back(std::pow(acc * dt, 1.0 / p.m));
    }
    return out;
}

namespace detail {

// e^{i dt (Lap - V)}: exact in Fourier for V = 0, Strang substeps otherwise.
inline void linear_propagate(Field& u, const Field* V, double dt, std::size_t substeps) {
    if (!V) {
        linear_substep(u, dt);
        return;
    }
    const ModelParams unused;
    const double h = dt / static_cast<double>(substeps);
    for (std::size_t s = 0; s < substeps; ++s) {
        phase_substep(u, V, unused, 0.5 * h, false);
        linear_substep(u, h);
        phase_substep(u, V, unused, 0.5 * h, false);
    }
}

inline Trajectory linear_trajectory(const Field& phi, const Field* V, double T, std::size_t nodes,
                                    std::size_t substeps) {
    Trajectory traj;
    const double dt = T / static_cast<double>(nodes);
    Field u(phi);
    traj.times.push_back(0.0);
    traj.states.push_back(u);
    for (std::size_t j = 1; j <= nodes; ++j) {
        linear_propagate(u, V, dt, substeps);
        traj.times.push_back(static_cast<double>(j) * dt);
        traj.states.push_back(u);
    }
    return traj;
}

}  // namespace detail

// mixed_norm of the linear flow of phi over the norm of phi in H1.
inline std::vector<double> strichartz_ratio(const Field& phi, const Potential& V, const MixedNormSpec& spec,
                                            std::size_t nodes = 64, std::size_t substeps = 8) {
    spec.validate();
    nodes = std::max<std::size_t>(nodes, 16);
    Field samples;
    const Field* Vp = nullptr;
    if (!V.is_zero()) {
        samples = sample(V, phi.grid);
        Vp = &samples;
    }
    const Trajectory traj = detail::linear_trajectory(phi, Vp, spec.T, nodes, substeps);
    const double norm = std::sqrt(h1_norm_sq(phi));
    if (!(norm > 0.0)) throw ParameterError("Strichartz ratio of a vanishing datum");
    std::vector<double> r = mixed_norm(traj, spec);
    for (auto& v : r) v /= norm;
    return r;
}

struct StrichartzBattery {
    std::vector<std::vector<double>> ratios;  // per datum, per pair
    std::vector<double> widths, frequencies;
    std::vector<double> spread;               // per pair, max / min over the battery
};

inline void to_json(nlohmann::json& j, const StrichartzBattery& b) {
    j = nlohmann::json{{"ratios", b.ratios}, {"widths", b.widths}, {"frequencies", b.frequencies},
                       {"spread", b.spread}};
}

// Gaussians of random width in [w_min, w_max] modulated by a random plane wave.
inline StrichartzBattery strichartz_battery(const Grid& g, const Potential& V, const MixedNormSpec& spec,
                                            std::size_t count = 20, std::uint64_t seed = 1, double w_min = 0.5,
                                            double w_max = 2.0, double xi_max = 2.0, std::size_t nodes = 32) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> logw(std::log(w_min), std::log(w_max));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    StrichartzBattery out;
    for (std::size_t i = 0; i < count; ++i) {
        const double w = std::exp(logw(rng));
        std::array<double, 3> xi{0.0, 0.0, 0.0};
        double xi2 = 0.0;
        for (int a = 0; a < g.d; ++a) {
            xi[a] = xi_max / std::sqrt(static_cast<double>(g.d)) * unit(rng);
            xi2 += xi[a] * xi[a];
        }
        const Field phi = field_from(g, [&](const std::array<double, 3>& x) {
            double r2 = 0.0, ph = 0.0;
            for (int a = 0; a < g.d; ++a) {
                r2 += x[a] * x[a];
                ph += xi[a] * x[a];
            }
            return std::polar(std::exp(-r2 / (2.0 * w * w)), ph);
        });
        out.ratios.push_back(strichartz_ratio(phi, V, spec, nodes));
        out.widths.push_back(w);
        out.frequencies.push_back(std::sqrt(xi2));
    }
    for (std::size_t p = 0; p < spec.pairs.size(); ++p) {
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (const auto& r : out.ratios) {
            lo = std::min(lo, r[p]);
            hi = std::max(hi, r[p]);
        }
        out.spread.push_back(hi / lo);
    }
    return out;
}

struct PicardOptions {
    std::size_t nodes = 16;     // trapezoid nodes on [0, T], at least 16
    std::size_t substeps = 8;   // Strang substeps per node interval when V is present
    bool nonlinear = true;
    double rel_tol = 1e-14;     // stop once d_k falls below rel_tol times the free X_T norm
};

struct PicardResult {
    Trajectory trajectory;               // last iterate
    std::vector<double> differences;     // d_k = ||u^{k+1} - u^k||_X
    std::vector<double> factors;         // d_{k+1} / d_k
    std::string status;                  // converged | max_iterations | outside contraction regime
    double rho0_smalldata = 0.0;         // X_T norm of the free evolution of phi
    bool contracting = false;
};

inline void to_json(nlohmann::json& j, const PicardResult& r) {
    j = nlohmann::json{{"differences", r.differences},
                       {"factors", r.factors},
                       {"status", r.status},
                       {"rho0_smalldata", r.rho0_smalldata},
                       {"contracting", r.contracting},
                       {"nodes", r.trajectory.times.size()}};
}

// Sum over the two admissible pairs of the L^m_T W^{1,n} norms.
inline double x_norm(const Trajectory& traj, const ModelParams& params) {
    const auto [p1, p2] = admissible_pairs(params);
    const std::vector<double> r = mixed_norm(traj, {{p1, p2}, traj.times.back(), true});
    return r[0] + r[1];
}

namespace detail {

inline Trajectory trajectory_difference(const Trajectory& a, const Trajectory& b) {
    Trajectory d;
    d.times = a.times;
    for (std::size_t j = 0; j < a.states.size(); ++j) {
        Field f(a.states[j]);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] -= b.states[j][i];
        d.states.push_back(std::move(f));
    }
    return d;
}

}  // namespace detail

// Fixed-point iteration of the Duhamel map with the time integral done by the
// trapezoid rule on the node grid:
// W_j = e^{i dt L}(W_{j-1} + dt/2 N_{j-1}) + dt/2 N_j,  u^{k+1}(t_j) = e^{i t_j L} phi + i W_j.
inline PicardResult picard_iterate(const Field& phi, const Potential& V, const ModelParams& params, double T,
                                   std::size_t iters, const PicardOptions& opts = {}) {
    if (!(T > 0.0)) throw ParameterError("Picard horizon must be positive");
    const std::size_t nodes = std::max<std::size_t>(opts.nodes, 16);
    const double dt = T / static_cast<double>(nodes);
    Field samples;
    const Field* Vp = nullptr;
    if (!V.is_zero()) {
        samples = sample(V, phi.grid);
        Vp = &samples;
    }
    const Trajectory free = detail::linear_trajectory(phi, Vp, T, nodes, opts.substeps);

    PicardResult res;
    res.rho0_smalldata = x_norm(free, params);
    res.status = "max_iterations";
    Trajectory cur = free;
    std::size_t above_one = 0;
    for (std::size_t k = 0; k < iters; ++k) {
        std::vector<Field> N;
        for (const auto& u : cur.states) {
            Field f(u.grid);
            if (opts.nonlinear) {
                const RealVec w = nonlocal_terms(u, params).coefficient;
                for (std::size_t i = 0; i < f.size(); ++i) f[i] = w[i] * u[i];
            }
            N.push_back(std::move(f));
        }
        Trajectory next;
        next.times = free.times;
        next.states.push_back(free.states[0]);
        Field W(phi.grid);
        const cplx iu(0.0, 1.0);
        for (std::size_t j = 1; j <= nodes; ++j) {
            for (std::size_t i = 0; i < W.size(); ++i) W[i] += 0.5 * dt * N[j - 1][i];
            detail::linear_propagate(W, Vp, dt, opts.substeps);
            for (std::size_t i = 0; i < W.size(); ++i) W[i] += 0.5 * dt * N[j][i];
            Field u(free.states[j]);
            for (std::size_t i = 0; i < u.size(); ++i) u[i] += iu * W[i];
            next.states.push_back(std::move(u));
        }
        const double d = x_norm(detail::trajectory_difference(next, cur), params);
        res.differences.push_back(d);
        cur = std::move(next);
        if (res.differences.size() >= 2) {
            const double prev = res.differences[res.differences.size() - 2];
            if (prev > 0.0) {
                const double f = d / prev;
                res.factors.push_back(f);
                above_one = f > 1.0 ? above_one + 1 : 0;
            }
        }
        if (above_one >= 3) {
            res.status = "outside contraction regime";
            break;
        }
        if (d <= opts.rel_tol * res.rho0_smalldata) {
            res.status = "converged";
            break;
        }
    }
    res.contracting = res.status != "outside contraction regime" &&
                      std::all_of(res.factors.begin(), res.factors.end(), [](double f) { return f < 1.0; });
    res.trajectory = std::move(cur);
    return res;
}

// ||(|x|^{-alpha} * f) g||_{r'} / (||f||_s ||g||_q) with 1/q + 1/r + 1/s + alpha/d = 2.
inline double bilinear_hls_quotient(const Grid& g, const RealVec& f, const RealVec& gv, double alpha, double s,
                                    double q) {
    const double inv_r = 2.0 - 1.0 / q - 1.0 / s - alpha / g.d;
    if (!(inv_r > 0.0 && inv_r < 1.0)) throw ParameterError("bilinear HLS exponents out of range");
    const double r_conj = 1.0 / (1.0 - inv_r);
    RealVec prod = kernel_convolve_real(g, f, alpha);
    for (std::size_t i = 0; i < prod.size(); ++i) prod[i] *= gv[i];
    return lp_norm_real(g, prod, r_conj) / (lp_norm_real(g, f, s) * lp_norm_real(g, gv, q));
}

}  // namespace choquard
