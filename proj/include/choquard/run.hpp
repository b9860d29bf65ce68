#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dynamics.hpp"
#include "energy.hpp"
#include "fft.hpp"
#include "ground_state.hpp"
#include "io.hpp"
#include "landscape.hpp"
#include "potential.hpp"
#include "probe.hpp"

namespace choquard {

// Malformed configuration; key() names the offending entry.
class UsageError : public Error {
public:
    UsageError(std::string key, const std::string& what) : Error(key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

enum class Experiment { constants, landscape, ground_state, m_curve, evolve, stability, kato, probe };

inline const std::vector<std::pair<Experiment, std::string>>& experiment_names() {
    static const std::vector<std::pair<Experiment, std::string>> names{
        {Experiment::constants, "constants"}, {Experiment::landscape, "landscape"},
        {Experiment::ground_state, "ground-state"}, {Experiment::m_curve, "m-curve"},
        {Experiment::evolve, "evolve"}, {Experiment::stability, "stability"},
        {Experiment::kato, "kato"}, {Experiment::probe, "probe"}};
    return names;
}

inline std::string to_string(Experiment e) {
    for (const auto& [k, v] : experiment_names())
        if (k == e) return v;
    return "unknown";
}

inline Experiment parse_experiment(const std::string& name) {
    for (const auto& [k, v] : experiment_names())
        if (v == name) return k;
    throw UsageError("experiment", "unknown experiment '" + name + "'");
}

// Option defaults per experiment. A null default means "derived at run time".
inline nlohmann::json option_defaults(Experiment e) {
    using nlohmann::json;
    switch (e) {
        case Experiment::constants:
            return {{"gn_n", 4096}, {"gn_R", 24.0}};
        case Experiment::landscape:
            return {{"curve_points", 200}, {"sign_samples", 64}};
        case Experiment::ground_state:
            return {{"a", nullptr}, {"a_fraction", 0.5}, {"tol", 1e-8}, {"max_iter", 3000}, {"boundary_samples", 32},
                    {"boundary_grid", {64, 8.0}}};
        case Experiment::m_curve:
            return {{"a_fractions", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8}}, {"tol", 1e-8}, {"max_iter", 3000}};
        case Experiment::evolve:
            return {{"initial", "gaussian"}, {"phi", ""}, {"a", nullptr}, {"a_fraction", 0.5}, {"width", 1.5},
                    {"T", 1.0}, {"tau", 1e-3}, {"record_every", 100}, {"checkpoint", false}, {"nonlinear", true}};
        case Experiment::stability:
            return {{"a", nullptr}, {"a_fraction", 0.5}, {"deltas", {1e-4, 1e-3, 1e-2}}, {"T", 10.0},
                    {"tau", 0.1}, {"record_every", 5}};
        case Experiment::kato:
            return json::object();
        case Experiment::probe:
            return {{"phi", ""}, {"amplitude", 1e-2}, {"width", 1.0}, {"T", 0.1}, {"iters", 30}, {"pairs", "auto"},
                    {"nodes", 16}, {"battery", 20}};
    }
    return json::object();
}

// Grid used when the configuration gives none. Minimizers at a = a0/2 spread
// over tens of length units, hence the wide box for the ground-state family.
inline std::pair<std::size_t, double> default_grid(Experiment e) {
    switch (e) {
        case Experiment::ground_state:
        case Experiment::m_curve:
        case Experiment::stability:
            return {128, 256.0};
        case Experiment::evolve:
        case Experiment::probe:
            return {32, 8.0};
        default:
            return {128, 12.0};
    }
}

struct RunConfig {
    Experiment experiment = Experiment::constants;
    ModelParams params;
    std::size_t n = 128;
    double L = 12.0;
    std::string potential = "zero";
    nlohmann::json options = nlohmann::json::object();
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    int threads = 1;

    Grid grid() const { return Grid(params.d, n, L); }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
    j = nlohmann::json{{"experiment", to_string(c.experiment)},
                       {"params", {{"d", c.params.d}, {"alpha", c.params.alpha}, {"q", c.params.q}}},
                       {"grid", {{"n", c.n}, {"L", c.L}}},
                       {"potential", c.potential},
                       {"options", c.options},
                       {"seed", c.seed},
                       {"output_dir", c.output_dir},
                       {"threads", c.threads}};
}

namespace detail {

template <class T>
T get_key(const nlohmann::json& j, const std::string& key, const std::string& path) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw UsageError(path, "wrong type");
    }
}

inline void check_keys(const nlohmann::json& j, const std::vector<std::string>& allowed, const std::string& prefix) {
    if (!j.is_object()) throw UsageError(prefix.empty() ? "config" : prefix, "expected an object");
    for (const auto& [k, v] : j.items())
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            throw UsageError(prefix.empty() ? k : prefix + "." + k, "unknown key");
}

inline bool same_kind(const nlohmann::json& a, const nlohmann::json& b) {
    if (a.is_null() || b.is_null()) return true;
    if (a.is_number() && b.is_number()) return true;
    return a.type() == b.type();
}

}  // namespace detail

// Validates a raw JSON configuration and fills defaults.
inline RunConfig parse_config(const nlohmann::json& raw) {
    detail::check_keys(raw, {"experiment", "params", "grid", "potential", "options", "seed", "output_dir", "threads"},
                       "");
    RunConfig c;
    if (!raw.contains("experiment")) throw UsageError("experiment", "missing");
    c.experiment = parse_experiment(detail::get_key<std::string>(raw, "experiment", "experiment"));

    if (raw.contains("params")) {
        const auto& p = raw.at("params");
        detail::check_keys(p, {"d", "alpha", "q"}, "params");
        if (p.contains("d")) c.params.d = detail::get_key<int>(p, "d", "params.d");
        if (p.contains("alpha")) c.params.alpha = detail::get_key<double>(p, "alpha", "params.alpha");
        if (p.contains("q")) c.params.q = detail::get_key<double>(p, "q", "params.q");
    }
    if (c.params.d < 3) throw UsageError("params.d", "must be at least 3");
    if (!(c.params.alpha > 0.0 && c.params.alpha < c.params.d)) throw UsageError("params.alpha", "must lie in (0, d)");
    if (!(c.params.q > c.params.q_lower() && c.params.q < c.params.q_upper()))
        throw UsageError("params.q", "must lie in (" + std::to_string(c.params.q_lower()) + ", " +
                                         std::to_string(c.params.q_upper()) + ")");

    std::tie(c.n, c.L) = default_grid(c.experiment);
    if (raw.contains("grid")) {
        const auto& g = raw.at("grid");
        detail::check_keys(g, {"n", "L"}, "grid");
        if (g.contains("n")) c.n = detail::get_key<std::size_t>(g, "n", "grid.n");
        if (g.contains("L")) c.L = detail::get_key<double>(g, "L", "grid.L");
    }
    try {
        c.grid();
    } catch (const ParameterError& e) {
        throw UsageError("grid", e.what());
    }

    if (raw.contains("potential")) c.potential = detail::get_key<std::string>(raw, "potential", "potential");
    try {
        parse_potential(c.potential);
    } catch (const Error& e) {
        throw UsageError("potential", e.what());
    }
    if (raw.contains("seed")) c.seed = detail::get_key<std::uint64_t>(raw, "seed", "seed");
    if (raw.contains("output_dir")) c.output_dir = detail::get_key<std::string>(raw, "output_dir", "output_dir");
    if (raw.contains("threads")) c.threads = detail::get_key<int>(raw, "threads", "threads");
    if (c.threads < 1) throw UsageError("threads", "must be positive");

    c.options = option_defaults(c.experiment);
    if (raw.contains("options")) {
        const auto& o = raw.at("options");
        if (!o.is_object()) throw UsageError("options", "expected an object");
        for (const auto& [k, v] : o.items()) {
            if (!c.options.contains(k)) throw UsageError("options." + k, "unknown key for " + to_string(c.experiment));
            if (!detail::same_kind(c.options[k], v)) throw UsageError("options." + k, "wrong type");
            c.options[k] = v;
        }
    }
    return c;
}

struct RunOutcome {
    int exit_code = 0;  // 0 pass, 2 assertion failure, 1 usage error
    std::string message;
    nlohmann::json summary;
    std::vector<std::string> files;
};

namespace detail {

class Artifacts {
public:
    Artifacts(const RunConfig& cfg, const LandscapeConstants& stamp) : dir_(cfg.output_dir) {
        std::filesystem::create_directories(dir_);
        nlohmann::json cj = cfg;
        config_ = cj;
        stamp_ = stamp;
    }

    std::string provenance() const { return nlohmann::json{{"config", config_}, {"constants", stamp_}}.dump(); }

    std::string csv(const std::string& name, const std::string& header, const std::vector<std::vector<double>>& rows) {
        const auto path = (dir_ / name).string();
        std::ofstream os(path);
        if (!os) throw FormatError(FormatError::Kind::io, "cannot open " + path);
        os << "# config: " << config_.dump() << '\n';
        os << "# constants: " << nlohmann::json(stamp_).dump() << '\n';
        os << header << '\n';
        os.precision(17);
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
            os << '\n';
        }
        files_.push_back(path);
        return path;
    }

    std::string field(const std::string& name, const Field& u) {
        const auto path = (dir_ / name).string();
        save_field(path, u, provenance());
        files_.push_back(path);
        return path;
    }

    std::string json(const std::string& name, const nlohmann::json& j) {
        const auto path = (dir_ / name).string();
        std::ofstream os(path);
        if (!os) throw FormatError(FormatError::Kind::io, "cannot open " + path);
        os << j.dump(2) << '\n';
        files_.push_back(path);
        return path;
    }

    const std::vector<std::string>& files() const { return files_; }

private:
    std::filesystem::path dir_;
    nlohmann::json config_;
    LandscapeConstants stamp_;
    std::vector<std::string> files_;
};

inline double resolve_mass(const RunConfig& cfg, const LandscapeConstants& c) {
    const auto& o = cfg.options;
    const double a = o["a"].is_null() ? o["a_fraction"].get<double>() * c.a0 : o["a"].get<double>();
    if (!(a > 0.0)) throw UsageError("options.a", "mass must be positive");
    if (!(a < c.a0)) throw UsageError("options.a", "above threshold a0 (" + std::to_string(c.a0) + ")");
    return a;
}

inline GroundStateOptions gs_options(const RunConfig& cfg) {
    GroundStateOptions o;
    if (cfg.options.contains("tol")) o.tol = cfg.options["tol"].get<double>();
    if (cfg.options.contains("max_iter")) o.max_iter = cfg.options["max_iter"].get<std::size_t>();
    return o;
}

struct ExperimentResult {
    nlohmann::json result;
    nlohmann::json checks = nlohmann::json::object();  // name -> bool
};

inline ExperimentResult run_constants(const RunConfig&, const LandscapeConstants& c, Artifacts&) {
    ExperimentResult r;
    r.result = c;
    const bool finite = std::isfinite(c.a0) && std::isfinite(c.rho0) && std::isfinite(c.K);
    r.checks["finite"] = finite;
    r.checks["positive"] = c.sobolev_S > 0.0 && c.hls_C > 0.0 && c.gn_C > 0.0 && c.a0 > 0.0 && c.rho0 > 0.0;
    return r;
}

inline ExperimentResult run_landscape(const RunConfig& cfg, const LandscapeConstants& c, Artifacts& art) {
    ExperimentResult r;
    const TrichotomyReport tri = trichotomy(c, cfg.params);
    const std::size_t samples = cfg.options["sign_samples"].get<std::size_t>();
    const double a1 = 0.5 * c.a0, rho1 = rho_max(a1, c, cfg.params);
    const SignPropagationReport sp = sign_propagation_check(a1, rho1, 0.25 * c.a0, samples, c, cfg.params);
    r.result = {{"trichotomy", tri},
                {"sign_propagation", {{"min_value", sp.min_value}, {"argmin_rho", sp.argmin_rho}, {"passed", sp.passed}}},
                {"rho_a", {{"half_a0", rho1}, {"a0", rho_max(c.a0, c, cfg.params)}}}};
    r.checks["below_pass"] = tri.below_pass;
    r.checks["at_pass"] = tri.at_pass;
    r.checks["above_pass"] = tri.above_pass;
    r.checks["sign_propagation"] = sp.passed;
    const std::size_t points = cfg.options["curve_points"].get<std::size_t>();
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < points; ++i) {
        const double rho = c.rho0 * 4.0 * static_cast<double>(i + 1) / static_cast<double>(points);
        rows.push_back({rho, f_value(0.5 * c.a0, rho, c, cfg.params), f_value(c.a0, rho, c, cfg.params),
                        f_value(2.0 * c.a0, rho, c, cfg.params)});
    }
    art.csv("landscape.csv", "rho (|grad u|_2^2),f_half_a0,f_a0,f_two_a0", rows);
    return r;
}

inline ExperimentResult run_ground_state(const RunConfig& cfg, const LandscapeConstants& c, Artifacts& art) {
    ExperimentResult r;
    const double a = resolve_mass(cfg, c);
    const Potential V = parse_potential(cfg.potential);
    const Grid g = cfg.grid();
    const GroundStateOptions o = gs_options(cfg);
    const GroundStateResult gs = find_ground_state(a, V, cfg.params, c, g, o);
    // Boundary states have |grad u|^2 = rho0 and are far narrower than the
    // minimizer, so they are sampled on their own finer box.
    const nlohmann::json& bg = cfg.options["boundary_grid"];
    const Grid gb = V.kind() == Potential::Kind::grid_sampled
                        ? g
                        : Grid(cfg.params.d, bg.at(0).get<std::size_t>(), bg.at(1).get<double>());
    const BoundaryReport br =
        boundary_energy_check(a, V, cfg.params, c, gb, cfg.options["boundary_samples"].get<std::size_t>(), cfg.seed);
    r.result = {{"a", a}, {"ground_state", gs}, {"boundary", br}};
    r.checks["m_negative"] = gs.m_a < 0.0;
    r.checks["inside_ball"] = gs.rho_attained < c.rho0;
    r.checks["mass_error"] = std::abs(mass(gs.u_a) - a) / a < 1e-10;
    r.checks["residual"] = gs.grad_residual < o.tol;
    r.checks["coercivity"] = gs.coercivity_violations == 0;
    r.checks["boundary_positive"] = br.all_positive;
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < gs.energy_history.size(); ++i)
        rows.push_back({static_cast<double>(i), gs.energy_history[i]});
    art.csv("ground_state.csv", "iteration (accepted step),energy (I)", rows);
    art.field("ground_state.chqf", gs.u_a);
    return r;
}

inline ExperimentResult run_m_curve(const RunConfig& cfg, const LandscapeConstants& c, Artifacts& art) {
    ExperimentResult r;
    std::vector<double> as;
    for (double f : cfg.options["a_fractions"].get<std::vector<double>>()) {
        if (!(f > 0.0)) throw UsageError("options.a_fractions", "fractions must be positive");
        if (!(f < 1.0)) throw UsageError("options.a_fractions", "above threshold a0");
        as.push_back(f * c.a0);
    }
    std::sort(as.begin(), as.end());
    const Potential V = parse_potential(cfg.potential);
    const auto curve = m_curve(as, V, cfg.params, c, cfg.grid(), gs_options(cfg));
    std::vector<std::vector<double>> rows;
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : curve) {
        rows.push_back({p.a, p.m, p.lambda, p.rho, p.residual, static_cast<double>(p.iterations)});
        pts.push_back(p);
    }
    art.csv("m_curve.csv", "a (mass),m (energy),lambda (frequency),rho (|grad u|_2^2),residual (H1),iterations", rows);
    // Splits a_k = a_i + a_j and scalings a_k = theta a_i found within the sampled masses.
    double worst_split = -std::numeric_limits<double>::infinity(), worst_scaling = worst_split;
    std::size_t splits = 0, scalings = 0;
    const double tol = 1e-9 * c.a0;
    for (std::size_t k = 0; k < curve.size(); ++k)
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = i; j < k; ++j)
                if (std::abs(curve[i].a + curve[j].a - curve[k].a) < tol) {
                    worst_split = std::max(worst_split, curve[k].m - curve[i].m - curve[j].m);
                    ++splits;
                }
            const double theta = curve[k].a / curve[i].a;
            worst_scaling = std::max(worst_scaling, curve[k].m - theta * curve[i].m);
            ++scalings;
        }
    r.result = {{"points", pts},
                {"subadditivity", {{"splits", splits}, {"worst_excess", splits ? nlohmann::json(worst_split) : nlohmann::json(nullptr)}}},
                {"scaling", {{"pairs", scalings}, {"worst_excess", scalings ? nlohmann::json(worst_scaling) : nlohmann::json(nullptr)}}}};
    r.checks["subadditivity"] = splits == 0 || worst_split <= 1e-6;
    r.checks["theta_scaling"] = scalings == 0 || worst_scaling <= 1e-6;
    r.checks["all_negative"] =
        std::all_of(curve.begin(), curve.end(), [](const MCurvePoint& p) { return p.m < 0.0; });
    return r;
}

inline ExperimentResult run_evolve(const RunConfig& cfg, const LandscapeConstants& c, Artifacts& art) {
    ExperimentResult r;
    const auto& o = cfg.options;
    const Potential V = parse_potential(cfg.potential);
    const Grid g = cfg.grid();
    const std::string initial = o["initial"].get<std::string>();
    Field phi;
    std::optional<Field> reference;
    if (initial == "gaussian") {
        phi = gaussian_state(g, resolve_mass(cfg, c), o["width"].get<double>());
    } else if (initial == "ground_state") {
        const GroundStateResult gs = find_ground_state(resolve_mass(cfg, c), V, cfg.params, c, g);
        phi = gs.u_a;
        reference = gs.u_a;
        r.result["lambda"] = gs.lambda;
    } else if (initial == "file") {
        const std::string path = o["phi"].get<std::string>();
        if (path.empty()) throw UsageError("options.phi", "required when initial is 'file'");
        phi = load_field(path);
        if (phi.grid != g) throw UsageError("options.phi", "field grid " + phi.grid.describe() + " differs from config grid");
    } else {
        throw UsageError("options.initial", "expected gaussian, ground_state or file");
    }
    EvolveOptions eo;
    eo.nonlinear = o["nonlinear"].get<bool>();
    eo.reference = reference;
    if (o["checkpoint"].get<bool>())
        eo.checkpoint = [&](std::size_t step, double, const Field& u) {
            art.field("checkpoint_" + std::to_string(step) + ".chqf", u);
        };
    const auto every = o["record_every"].get<std::size_t>();
    if (every == 0) throw UsageError("options.record_every", "must be positive");
    const double T = o["T"].get<double>(), tau = o["tau"].get<double>();
    if (!(T > 0.0)) throw UsageError("options.T", "must be positive");
    if (!(tau > 0.0)) throw UsageError("options.tau", "must be positive");
    try {
        const EvolutionTrace tr = evolve(phi, V, cfg.params, T, tau, every, eo);
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < tr.times.size(); ++i)
            rows.push_back({tr.times[i], tr.mass[i], tr.energy[i],
                            tr.orbit_dist.empty() ? std::nan("") : tr.orbit_dist[i]});
        art.csv("evolve.csv", "t (time),mass (L2^2),energy (I),orbit_dist (H1)", rows);
        art.field("final.chqf", tr.final_state);
        r.result["trace"] = tr;
        if (reference) r.result["phase_rate"] = phase_rate(tr);
        double mass_drift = 0.0;
        for (double m : tr.mass) mass_drift = std::max(mass_drift, std::abs(m - tr.mass.front()) / tr.mass.front());
        r.result["mass_drift"] = mass_drift;
        r.checks["mass_conserved"] = mass_drift <= 1e-12;
        r.checks["no_blowup"] = true;
    } catch (const BlowUpError& e) {
        art.field("last_finite.chqf", e.last_finite_state());
        r.result["blowup"] = {{"message", e.what()}, {"time", e.time()}};
        r.checks["no_blowup"] = false;
    }
    return r;
}

inline ExperimentResult run_stability(const RunConfig& cfg, const LandscapeConstants& c, Artifacts& art) {
    ExperimentResult r;
    const auto& o = cfg.options;
    StabilityOptions so;
    so.T = o["T"].get<double>();
    so.tau = o["tau"].get<double>();
    so.record_every = o["record_every"].get<std::size_t>();
    so.seed = cfg.seed;
    so.threads = cfg.threads;
    const auto deltas = o["deltas"].get<std::vector<double>>();
    const Potential V = parse_potential(cfg.potential);
    const GroundStateResult gs = find_ground_state(resolve_mass(cfg, c), V, cfg.params, c, cfg.grid());
    const StabilityReport rep = stability_experiment(gs, V, cfg.params, deltas, so);
    std::vector<std::vector<double>> rows;
    for (const auto& run : rep.runs)
        for (std::size_t i = 0; i < run.times.size(); ++i) rows.push_back({run.delta, run.times[i], run.orbit_dist[i]});
    art.csv("stability.csv", "delta (H1),t (time),orbit_dist (H1)", rows);
    art.field("ground_state.chqf", gs.u_a);
    r.result = rep;
    r.checks["sup_dist_nondecreasing"] = rep.nondecreasing;
    r.checks["small_at_delta_1e-3"] = rep.small_at_reference;
    r.checks["no_blowup"] = !rep.any_blowup;
    return r;
}

inline ExperimentResult run_kato(const RunConfig& cfg, const LandscapeConstants& c, Artifacts&) {
    ExperimentResult r;
    const Potential V = parse_potential(cfg.potential);
    const ConditionReport rep = check_conditions(V, cfg.grid(), c, cfg.params);
    r.result = {{"potential", V.describe()}, {"conditions", rep}};
    r.checks["kato_lhalfd_finite"] = rep.kato_lhalfd_finite;
    r.checks["neg_kato_below_threshold"] = rep.neg_kato_below_threshold;
    r.checks["sobolev_condition"] = rep.sobolev_condition != ConditionStatus::fail;
    return r;
}

inline std::vector<AdmissiblePair> resolve_pairs(const nlohmann::json& spec, const ModelParams& params) {
    if (spec.is_string()) {
        if (spec.get<std::string>() != "auto") throw UsageError("options.pairs", "expected 'auto' or a list of [m, n]");
        const auto [p1, p2] = admissible_pairs(params);
        return {p1, p2};
    }
    std::vector<AdmissiblePair> out;
    try {
        for (const auto& e : spec) out.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
    } catch (const nlohmann::json::exception&) {
        throw UsageError("options.pairs", "expected 'auto' or a list of [m, n]");
    }
    for (const auto& p : out)
        if (!p.admissible(params.d)) throw UsageError("options.pairs", "pair is not admissible");
    return out;
}

inline ExperimentResult run_probe(const RunConfig& cfg, const LandscapeConstants&, Artifacts& art) {
    ExperimentResult r;
    const auto& o = cfg.options;
    const Grid g = cfg.grid();
    const Potential V = parse_potential(cfg.potential);
    Field phi;
    const std::string path = o["phi"].get<std::string>();
    if (!path.empty()) {
        phi = load_field(path);
        if (phi.grid.d != cfg.params.d) throw UsageError("options.phi", "field dimension differs from params.d");
    } else {
        phi = gaussian_state(g, 1.0, o["width"].get<double>());
        const double scale = o["amplitude"].get<double>() / std::sqrt(h1_norm_sq(phi));
        for (auto& v : phi.values) v *= scale;
    }
    const double T = o["T"].get<double>();
    if (!(T > 0.0)) throw UsageError("options.T", "must be positive");
    const MixedNormSpec spec{resolve_pairs(o["pairs"], cfg.params), T, true};
    PicardOptions po;
    po.nodes = o["nodes"].get<std::size_t>();
    const PicardResult pic = picard_iterate(phi, V, cfg.params, T, o["iters"].get<std::size_t>(), po);
    const auto ratios = strichartz_ratio(phi, V, spec);
    const StrichartzBattery bat = strichartz_battery(phi.grid, V, spec, o["battery"].get<std::size_t>(), cfg.seed);

    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : spec.pairs) pairs.push_back(p);
    r.result = {{"pairs", pairs}, {"strichartz_ratio", ratios}, {"battery", bat}, {"picard", pic}};
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < pic.differences.size(); ++k)
        rows.push_back({static_cast<double>(k), pic.differences[k], k >= 1 && k - 1 < pic.factors.size() ? pic.factors[k - 1] : std::nan("")});
    art.csv("picard.csv", "iteration,difference (X_T),factor (ratio)", rows);
    r.checks["contracting"] = pic.contracting;
    r.checks["battery_bounded"] =
        std::all_of(bat.spread.begin(), bat.spread.end(), [](double s) { return std::isfinite(s) && s < 10.0; });
    return r;
}

}  // namespace detail

// Constants for a configuration, including the negative part of its potential.
inline LandscapeConstants constants_for(const RunConfig& cfg) {
    GnOptions gn;
    if (cfg.experiment == Experiment::constants) {
        gn.n = cfg.options["gn_n"].get<std::size_t>();
        gn.R = cfg.options["gn_R"].get<double>();
    }
    // kato reports on the conditions themselves, which may fail; its stamp is the free landscape.
    const Potential V = parse_potential(cfg.potential);
    const bool inject = !V.is_zero() && cfg.experiment != Experiment::kato;
    const double vminus = inject ? negative_part_halfd_norm(V, cfg.grid()) : 0.0;
    return compute_constants(cfg.params, vminus, gn);
}

inline RunOutcome run(const RunConfig& cfg) {
    RunOutcome out;
    try {
        configure_fft(cfg.threads);
        const LandscapeConstants stamp = constants_for(cfg);
        detail::Artifacts art(cfg, stamp);
        detail::ExperimentResult res;
        switch (cfg.experiment) {
            case Experiment::constants: res = detail::run_constants(cfg, stamp, art); break;
            case Experiment::landscape: res = detail::run_landscape(cfg, stamp, art); break;
            case Experiment::ground_state: res = detail::run_ground_state(cfg, stamp, art); break;
            case Experiment::m_curve: res = detail::run_m_curve(cfg, stamp, art); break;
            case Experiment::evolve: res = detail::run_evolve(cfg, stamp, art); break;
            case Experiment::stability: res = detail::run_stability(cfg, stamp, art); break;
            case Experiment::kato: res = detail::run_kato(cfg, stamp, art); break;
            case Experiment::probe: res = detail::run_probe(cfg, stamp, art); break;
        }
        const LandscapeConstants after = constants_for(cfg);
        const bool stamp_ok = nlohmann::json(after) == nlohmann::json(stamp);
        res.checks["constants_stamp_unchanged"] = stamp_ok;
        bool pass = true;
        for (const auto& [k, v] : res.checks.items()) pass = pass && v.get<bool>();
        out.summary = {{"experiment", to_string(cfg.experiment)},
                       {"config", cfg},
                       {"constants", stamp},
                       {"checks", res.checks},
                       {"status", pass ? "pass" : "fail"},
                       {"result", res.result}};
        art.json(to_string(cfg.experiment) + ".json", out.summary);
        out.files = art.files();
        out.exit_code = pass ? 0 : 2;
        out.message = to_string(cfg.experiment) + (pass ? ": pass" : ": assertion failure");
    } catch (const UsageError& e) {
        out.exit_code = 1;
        out.message = e.what();
    } catch (const ParameterError& e) {
        out.exit_code = 1;
        out.message = e.what();
    } catch (const ConvergenceError& e) {
        out.exit_code = 2;
        out.message = e.what();
    } catch (const FormatError& e) {
        out.exit_code = 1;
        out.message = e.what();
    }
    return out;
}

}  // namespace choquard
