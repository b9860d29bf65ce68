#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "energy.hpp"
#include "ground_state.hpp"
#include "potential.hpp"

namespace choquard {

class BlowUpError : public Error {
public:
    BlowUpError(const std::string& what, Field last_finite, double time)
        : Error(what), last_(std::move(last_finite)), time_(time) {}
    const Field& last_finite_state() const { return last_; }
    double time() const { return time_; }

private:
    Field last_;
    double time_;
};

namespace detail {

// exp(-i dt |k|^2), cached per grid and step.
inline std::shared_ptr<const ComplexVec> free_propagator(const Grid& g, double dt) {
    static std::mutex mutex;
    static std::map<GridKey, std::shared_ptr<const ComplexVec>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    GridKey key{g.d, g.n, g.L, dt};
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    if (cache.size() > 8) cache.clear();
    const auto k2 = k2_table(g);
    auto table = std::make_shared<ComplexVec>(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) (*table)[i] = std::polar(1.0, -dt * (*k2)[i]);
    cache.emplace(key, table);
    return table;
}

inline void linear_substep(Field& u, double dt) {
    const Grid& g = u.grid;
    const auto prop = free_propagator(g, dt);
    fft_forward(g, u.data());
    const double inv = 1.0 / static_cast<double>(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) u[i] *= (*prop)[i] * inv;
    fft_backward(g, u.data());
}

// u <- exp(i dt (-V + w(|u|))) u, exact because |u| is invariant under this flow.
inline void phase_substep(Field& u, const Field* V, const ModelParams& params, double dt, bool nonlinear) {
    if (!nonlinear && !V) return;
    RealVec w;
    if (nonlinear) w = nonlocal_terms(u, params).coefficient;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double phase = 0.0;
        if (nonlinear) phase += w[i];
        if (V) phase -= (*V)[i].real();
        u[i] *= std::polar(1.0, dt * phase);
    }
}

}  // namespace detail

struct StepOptions {
    bool nonlinear = true;
};

// One Strang step: half phase flow, full free flow, half phase flow.
// Negative tau runs the adjoint step, which inverts a forward step.
inline Field strang_step(const Field& u, const ModelParams& params, double tau, const StepOptions& opts = {}) {
    Field v(u);
    detail::phase_substep(v, nullptr, params, 0.5 * tau, opts.nonlinear);
    detail::linear_substep(v, tau);
    detail::phase_substep(v, nullptr, params, 0.5 * tau, opts.nonlinear);
    return v;
}

inline Field strang_step(const Field& u, const Field& V, const ModelParams& params, double tau,
                         const StepOptions& opts = {}) {
    require_same_grid(u.grid, V.grid);
    Field v(u);
    detail::phase_substep(v, &V, params, 0.5 * tau, opts.nonlinear);
    detail::linear_substep(v, tau);
    detail::phase_substep(v, &V, params, 0.5 * tau, opts.nonlinear);
    return v;
}

struct OrbitAlignment {
    double theta = 0.0;
    std::array<long, 3> y{0, 0, 0};
    std::array<double, 3> subgrid{0.0, 0.0, 0.0};  // fractional refinement of y, in cells
    double dist_h1 = 0.0;
};

inline void to_json(nlohmann::json& j, const OrbitAlignment& a) {
    j = nlohmann::json{{"theta", a.theta}, {"y", a.y}, {"subgrid", a.subgrid}, {"dist_h1", a.dist_h1}};
}

namespace detail {

// ||u - e^{i theta} S_s u_a||_{H1} and the optimal theta, for a real shift s (cells).
inline std::pair<double, double> shifted_distance(const Grid& g, const ComplexVec& su, const ComplexVec& sa,
                                                  const std::array<double, 3>& s) {
    const auto k2 = k2_table(g);
    const double h = g.h();
    ComplexVec shifted(sa.size());
    for_each_mode(g, [&](std::size_t i, const std::array<double, 3>& k) {
        double arg = 0.0;
        for (int a = 0; a < g.d; ++a) arg += k[a] * s[a] * h;
        shifted[i] = sa[i] * std::polar(1.0, -arg);
    });
    const cplx inner = h1_inner_spectra(g, shifted, su);
    const double theta = std::arg(inner);
    const cplx phase = std::polar(1.0, theta);
    double acc = 0.0;
    for (std::size_t i = 0; i < su.size(); ++i) acc += (1.0 + (*k2)[i]) * std::norm(su[i] - phase * shifted[i]);
    return {std::sqrt(acc * g.cell() / static_cast<double>(g.size())), theta};
}

}  // namespace detail

// Closest point of the orbit {e^{i theta} u_a(. - y)} to u in H1. The lattice
// shift maximizes the H1 cross-correlation; a per-axis parabola through the
// peak proposes a subgrid shift, kept only if it lowers the distance.
inline OrbitAlignment align_to_orbit(const Field& u, const Field& u_a, bool search_translation = true) {
    require_same_grid(u.grid, u_a.grid);
    const Grid& g = u.grid;
    const ComplexVec su = spectrum(u), sa = spectrum(u_a);
    OrbitAlignment out;
    if (!search_translation) {
        auto [dist, theta] = detail::shifted_distance(g, su, sa, {0.0, 0.0, 0.0});
        out.dist_h1 = dist;
        out.theta = theta;
        return out;
    }
    const auto k2 = detail::k2_table(g);
    ComplexVec corr(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) corr[i] = (1.0 + (*k2)[i]) * std::conj(sa[i]) * su[i];
    fft_backward(g, corr.data());
    std::size_t best = 0;
    double best_mag = -1.0;
    for (std::size_t i = 0; i < corr.size(); ++i)
        if (std::abs(corr[i]) > best_mag) {
            best_mag = std::abs(corr[i]);
            best = i;
        }
    const std::size_t n = g.n;
    std::array<std::size_t, 3> idx{0, 0, 0};
    {
        std::size_t rest = best;
        for (int a = g.d - 1; a >= 0; --a) {
            idx[a] = rest % n;
            rest /= n;
        }
    }
    std::array<double, 3> lattice{0.0, 0.0, 0.0};
    for (int a = 0; a < g.d; ++a) {
        out.y[a] = g.freq_index(idx[a]);
        lattice[a] = static_cast<double>(out.y[a]);
    }
    auto [dist, theta] = detail::shifted_distance(g, su, sa, lattice);
    out.dist_h1 = dist;
    out.theta = theta;

    std::array<double, 3> refined = lattice;
    for (int a = 0; a < g.d; ++a) {
        std::size_t stride = 1;
        for (int b = a + 1; b < g.d; ++b) stride *= n;
        const std::size_t base = best - idx[a] * stride;
        const double cm = std::abs(corr[base + ((idx[a] + n - 1) % n) * stride]);
        const double cp = std::abs(corr[base + ((idx[a] + 1) % n) * stride]);
        const double curv = cm - 2.0 * best_mag + cp;
        if (curv < 0.0) refined[a] += std::clamp(0.5 * (cm - cp) / curv, -0.5, 0.5);
    }
    if (refined != lattice) {
        auto [rdist, rtheta] = detail::shifted_distance(g, su, sa, refined);
        if (rdist < out.dist_h1) {
            out.dist_h1 = rdist;
            out.theta = rtheta;
            for (int a = 0; a < g.d; ++a) out.subgrid[a] = refined[a] - lattice[a];
        }
    }
    return out;
}

struct EvolveOptions {
    bool nonlinear = true;
    std::optional<Field> reference;          // orbit representative for orbit_dist
    bool translation_search = true;          // ignored (off) when V is present
    double blowup_threshold = 1e6;
    std::function<void(std::size_t, double, const Field&)> checkpoint;  // called at every record
};

struct EvolutionTrace {
    std::vector<double> times;
    std::vector<double> mass;
    std::vector<double> energy;
    std::vector<double> orbit_dist;  // empty without a reference
    std::vector<double> phase;       // unwrapped arg <u_ref, u(t)>, empty without a reference
    double tau = 0.0;
    std::size_t steps = 0;
    double max_step_mass_drift = 0.0;
    double energy_drift = 0.0;       // max over records of |I(t) - I(0)| / |I(0)|
    Field final_state;
};

inline void to_json(nlohmann::json& j, const EvolutionTrace& t) {
    j = nlohmann::json{{"tau", t.tau},
                       {"steps", t.steps},
                       {"records", t.times.size()},
                       {"max_step_mass_drift", t.max_step_mass_drift},
                       {"energy_drift", t.energy_drift},
                       {"final_time", t.times.empty() ? 0.0 : t.times.back()}};
    if (!t.orbit_dist.empty())
        j["sup_orbit_dist"] = *std::max_element(t.orbit_dist.begin(), t.orbit_dist.end());
}

namespace detail {

// Kahan-summed mass, so that the per-step drift is not dominated by summation error.
inline std::tuple<double, double, bool> compensated_mass(const Field& u) {
    double sum = 0.0, comp = 0.0, peak = 0.0;
    bool finite = true;
    for (const auto& v : u.values) {
        const double a2 = std::norm(v);
        finite = finite && std::isfinite(a2);
        peak = std::max(peak, a2);
        const double y = a2 - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return {sum * u.grid.cell(), peak, finite};
}

inline EvolutionTrace evolve_impl(const Field& phi, const Field* V, const ModelParams& params, double T, double tau,
                                  std::size_t record_every, const EvolveOptions& opts) {
    if (!(T > 0.0)) throw ParameterError("evolution horizon must be positive");
    if (!(tau > 0.0)) throw ParameterError("time step must be positive");
    if (record_every == 0) throw ParameterError("record_every must be positive");
    if (opts.reference) require_same_grid(opts.reference->grid, phi.grid);
    const std::size_t steps = static_cast<std::size_t>(std::ceil(T / tau - 1e-9));
    const double dt = T / static_cast<double>(steps);
    const bool translate = opts.translation_search && V == nullptr;

    EvolutionTrace trace;
    trace.tau = dt;
    trace.steps = steps;
    double e0 = 0.0, last_phase = 0.0, unwrap = 0.0;
    auto record = [&](std::size_t step, const Field& u) {
        const double t = static_cast<double>(step) * dt;
        trace.times.push_back(t);
        trace.mass.push_back(mass(u));
        const double e = V ? energy(u, *V, params).total : energy(u, params).total;
        trace.energy.push_back(e);
        if (step == 0) e0 = e;
        trace.energy_drift = std::max(trace.energy_drift, std::abs(e - e0) / std::max(std::abs(e0), 1e-300));
        if (opts.reference) {
            trace.orbit_dist.push_back(align_to_orbit(u, *opts.reference, translate).dist_h1);
            const double ph = std::arg(l2_inner(*opts.reference, u));
            if (step > 0) {
                double jump = ph - last_phase;
                while (jump > std::numbers::pi) jump -= 2.0 * std::numbers::pi;
                while (jump < -std::numbers::pi) jump += 2.0 * std::numbers::pi;
                unwrap += jump;
            } else {
                unwrap = ph;
            }
            last_phase = ph;
            trace.phase.push_back(unwrap);
        }
        if (opts.checkpoint) opts.checkpoint(step, t, u);
    };

    Field u(phi);
    record(0, u);
    double m_prev = std::get<0>(compensated_mass(u));
    Field last_finite(u);
    bool pending_half = true;  // the opening half phase step has not been applied yet
    for (std::size_t step = 1; step <= steps; ++step) {
        if (pending_half) phase_substep(u, V, params, 0.5 * dt, opts.nonlinear);
        linear_substep(u, dt);
        const bool closing = step % record_every == 0 || step == steps;
        // Consecutive phase half steps merge exactly since both see the same |u|.
        phase_substep(u, V, params, closing ? 0.5 * dt : dt, opts.nonlinear);
        pending_half = closing;

        const auto [m, peak, finite] = compensated_mass(u);
        if (!finite || std::sqrt(peak) > opts.blowup_threshold)
            throw BlowUpError("blow-up suspected at t = " + std::to_string((step - 1) * dt), last_finite,
                              static_cast<double>(step - 1) * dt);
        trace.max_step_mass_drift = std::max(trace.max_step_mass_drift, std::abs(m - m_prev) / m_prev);
        m_prev = m;
        if (closing) {
            record(step, u);
            last_finite = u;
        }
    }
    trace.final_state = std::move(u);
    return trace;
}

}  // namespace detail

inline EvolutionTrace evolve(const Field& phi, const ModelParams& params, double T, double tau,
                             std::size_t record_every, const EvolveOptions& opts = {}) {
    return detail::evolve_impl(phi, nullptr, params, T, tau, record_every, opts);
}

inline EvolutionTrace evolve(const Field& phi, const Potential& V, const ModelParams& params, double T, double tau,
                             std::size_t record_every, const EvolveOptions& opts = {}) {
    if (V.is_zero()) return detail::evolve_impl(phi, nullptr, params, T, tau, record_every, opts);
    const Field samples = sample(V, phi.grid);
    return detail::evolve_impl(phi, &samples, params, T, tau, record_every, opts);
}

// Least-squares slope of the unwrapped phase; a standing wave e^{-i lambda t} u gives -lambda.
inline double phase_rate(const EvolutionTrace& t) {
    const std::size_t n = t.phase.size();
    if (n < 2) throw ParameterError("phase rate needs at least two records");
    double mt = 0.0, mp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mt += t.times[i];
        mp += t.phase[i];
    }
    mt /= n;
    mp /= n;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (t.times[i] - mt) * (t.phase[i] - mp);
        den += (t.times[i] - mt) * (t.times[i] - mt);
    }
    return num / den;
}

// Random smooth field with unit H1 norm: complex white noise filtered by
// exp(-|k|^2 / (2 k_cut^2)).
inline Field random_h1_unit(const Grid& g, std::mt19937_64& rng, double k_cut) {
    std::normal_distribution<double> normal(0.0, 1.0);
    ComplexVec spec(g.size());
    const auto k2 = detail::k2_table(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double re = normal(rng), im = normal(rng);
        spec[i] = cplx(re, im) * std::exp(-(*k2)[i] / (2.0 * k_cut * k_cut));
    }
    Field w = from_spectrum(g, std::move(spec));
    const double norm = std::sqrt(h1_norm_sq(w));
    for (auto& v : w.values) v /= norm;
    return w;
}

struct StabilityRun {
    double delta = 0.0;
    double sup_dist = 0.0;
    double initial_dist = 0.0;
    double mass_error = 0.0;
    double energy_drift = 0.0;
    bool blowup = false;
    std::vector<double> times, orbit_dist;
};

struct StabilityReport {
    double a = 0.0;
    double m_a = 0.0;
    double lambda = 0.0;
    std::vector<StabilityRun> runs;
    bool nondecreasing = false;
    bool small_at_reference = false;  // sup dist at delta = 1e-3 below 0.1
    bool any_blowup = false;
    bool passed() const { return nondecreasing && small_at_reference && !any_blowup; }
};

inline void to_json(nlohmann::json& j, const StabilityReport& r) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& run : r.runs)
        runs.push_back({{"delta", run.delta},
                        {"sup_dist", run.sup_dist},
                        {"initial_dist", run.initial_dist},
                        {"mass_error", run.mass_error},
                        {"energy_drift", run.energy_drift},
                        {"blowup", run.blowup}});
    j = nlohmann::json{{"a", r.a},
                       {"m_a", r.m_a},
                       {"lambda", r.lambda},
                       {"runs", runs},
                       {"sup_dist_nondecreasing", r.nondecreasing},
                       {"small_at_delta_1e-3", r.small_at_reference},
                       {"blowup", r.any_blowup},
                       {"passed", r.passed()},
                       {"note", "distance is measured to the orbit of the single computed minimizer"}};
}

struct StabilityOptions {
    double T = 10.0;
    double tau = 0.1;
    std::size_t record_every = 5;
    std::uint64_t seed = 1;
    int threads = 1;
    double k_cut = 0.0;  // 0 selects a quarter of the Nyquist wavenumber
};

// Evolves (u_a + delta w) renormalized to mass a for each delta and records the
// supremum of the H1 distance to the orbit of u_a.
inline StabilityReport stability_experiment(const GroundStateResult& gs, const Potential& V,
                                            const ModelParams& params, const std::vector<double>& deltas,
                                            const StabilityOptions& opts = {}) {
    const Grid& g = gs.u_a.grid;
    const double a = mass(gs.u_a);
    std::mt19937_64 rng(opts.seed);
    const double k_cut = opts.k_cut > 0.0 ? opts.k_cut : 0.25 * g.dk() * (g.n / 2);
    const Field w = random_h1_unit(g, rng, k_cut);

    auto run_one = [&](double delta) {
        StabilityRun run;
        run.delta = delta;
        Field phi(gs.u_a);
        for (std::size_t i = 0; i < g.size(); ++i) phi[i] += delta * w[i];
        normalize_mass(phi, a);
        run.mass_error = std::abs(mass(phi) - a) / a;
        EvolveOptions eo;
        eo.reference = gs.u_a;
        try {
            EvolutionTrace t = evolve(phi, V, params, opts.T, opts.tau, opts.record_every, eo);
            run.times = t.times;
            run.orbit_dist = t.orbit_dist;
            run.initial_dist = t.orbit_dist.front();
            run.sup_dist = *std::max_element(t.orbit_dist.begin(), t.orbit_dist.end());
            run.energy_drift = t.energy_drift;
        } catch (const BlowUpError&) {
            run.blowup = true;
            run.sup_dist = std::numeric_limits<double>::infinity();
        }
        return run;
    };

    StabilityReport rep;
    rep.a = a;
    rep.m_a = gs.m_a;
    rep.lambda = gs.lambda;
    if (opts.threads > 1) {
        std::vector<std::future<StabilityRun>> jobs;
        for (double d : deltas) jobs.push_back(std::async(std::launch::async, run_one, d));
        for (auto& j : jobs) rep.runs.push_back(j.get());
    } else {
        for (double d : deltas) rep.runs.push_back(run_one(d));
    }

    std::vector<StabilityRun> sorted = rep.runs;
    std::sort(sorted.begin(), sorted.end(), [](const auto& x, const auto& y) { return x.delta < y.delta; });
    rep.nondecreasing = true;
    for (std::size_t i = 1; i < sorted.size(); ++i)
        rep.nondecreasing = rep.nondecreasing && sorted[i].sup_dist >= sorted[i - 1].sup_dist;
    rep.small_at_reference = false;
    for (const auto& r : rep.runs) {
        rep.any_blowup = rep.any_blowup || r.blowup;
        if (std::abs(r.delta - 1e-3) < 1e-15) rep.small_at_reference = r.sup_dist < 0.1;
    }
    return rep;
}

// Computes the minimizer at mass a on grid g first.
inline StabilityReport stability_experiment(double a, const Potential& V, const ModelParams& params,
                                            const LandscapeConstants& c, const Grid& g,
                                            const std::vector<double>& deltas, const StabilityOptions& opts = {},
                                            const GroundStateOptions& gs_opts = {}) {
    const GroundStateResult gs = find_ground_state(a, V, params, c, g, gs_opts);
    return stability_experiment(gs, V, params, deltas, opts);
}

}  // namespace choquard
