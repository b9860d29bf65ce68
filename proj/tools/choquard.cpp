#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <choquard/run.hpp>

namespace {

using nlohmann::json;

struct Flags {
    std::string config, out, potential, phi, initial, pairs;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads, d;
    std::optional<double> alpha, q, L, a, T, tau, tol, amplitude;
    std::optional<std::size_t> n, iters, record_every;
    std::vector<double> deltas, a_fractions;
    bool checkpoint = false;
};

json parse_pairs(const std::string& text) {
    if (text == "auto") return "auto";
    json out = json::array();
    std::stringstream all(text);
    std::string item;
    while (std::getline(all, item, ';')) {
        const auto comma = item.find(',');
        if (comma == std::string::npos) throw choquard::UsageError("options.pairs", "expected m,n;m,n or auto");
        try {
            out.push_back({std::stod(item.substr(0, comma)), std::stod(item.substr(comma + 1))});
        } catch (const std::exception&) {
            throw choquard::UsageError("options.pairs", "expected m,n;m,n or auto");
        }
    }
    return out;
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream is(path);
    if (!is) throw choquard::UsageError("config", "cannot open " + path);
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw choquard::UsageError("config", std::string("malformed JSON: ") + e.what());
    }
}

json assemble(const Flags& f, const std::string& subcommand) {
    json raw = load_config(f.config);
    if (!raw.is_object()) throw choquard::UsageError("config", "expected a JSON object");
    if (!subcommand.empty()) {
        if (raw.contains("experiment") && raw["experiment"] != subcommand)
            throw choquard::UsageError("experiment", "config names " + raw["experiment"].dump() +
                                                         " but the subcommand is " + subcommand);
        raw["experiment"] = subcommand;
    }
    auto set = [&](const json::json_pointer& ptr, const auto& value) { raw[ptr] = value; };
    if (!f.out.empty()) raw["output_dir"] = f.out;
    if (f.seed) raw["seed"] = *f.seed;
    if (f.threads) raw["threads"] = *f.threads;
    if (f.d) set("/params/d"_json_pointer, *f.d);
    if (f.alpha) set("/params/alpha"_json_pointer, *f.alpha);
    if (f.q) set("/params/q"_json_pointer, *f.q);
    if (f.n) set("/grid/n"_json_pointer, *f.n);
    if (f.L) set("/grid/L"_json_pointer, *f.L);
    if (!f.potential.empty()) raw["potential"] = f.potential;
    if (f.a) set("/options/a"_json_pointer, *f.a);
    if (f.T) set("/options/T"_json_pointer, *f.T);
    if (f.tau) set("/options/tau"_json_pointer, *f.tau);
    if (f.tol) set("/options/tol"_json_pointer, *f.tol);
    if (f.amplitude) set("/options/amplitude"_json_pointer, *f.amplitude);
    if (f.iters) set("/options/iters"_json_pointer, *f.iters);
    if (f.record_every) set("/options/record_every"_json_pointer, *f.record_every);
    if (!f.phi.empty()) set("/options/phi"_json_pointer, f.phi);
    if (!f.initial.empty()) set("/options/initial"_json_pointer, f.initial);
    if (!f.pairs.empty()) set("/options/pairs"_json_pointer, parse_pairs(f.pairs));
    if (!f.deltas.empty()) set("/options/deltas"_json_pointer, f.deltas);
    if (!f.a_fractions.empty()) set("/options/a_fractions"_json_pointer, f.a_fractions);
    if (f.checkpoint) set("/options/checkpoint"_json_pointer, true);
    return raw;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Normalized ground states and dynamics of a Choquard equation with critical exponent"};
    app.require_subcommand(0, 1);
    app.fallthrough();
    Flags f;
    app.add_option("--config", f.config, "JSON run configuration");
    app.add_option("--out", f.out, "Output directory");
    app.add_option("--seed", f.seed, "Random seed");
    app.add_option("--threads", f.threads, "FFT and sweep threads");

    auto model_flags = [&](CLI::App* sub) {
        sub->add_option("--d", f.d, "Dimension");
        sub->add_option("--alpha", f.alpha, "Riesz order");
        sub->add_option("--q", f.q, "Subcritical exponent");
        sub->add_option("--n", f.n, "Grid points per axis");
        sub->add_option("--L", f.L, "Box half-width");
        sub->add_option("--potential", f.potential, "zero | gaussian_well:depth=..,width=.. | yukawa:strength=..,range=.. | file:path");
    };
    std::vector<CLI::App*> subs;
    for (const auto& [e, name] : choquard::experiment_names()) {
        CLI::App* sub = app.add_subcommand(name, "Run the " + name + " experiment");
        model_flags(sub);
        subs.push_back(sub);
    }
    auto* gs = app.get_subcommand("ground-state");
    gs->add_option("--a", f.a, "Prescribed mass");
    gs->add_option("--tol", f.tol, "Projected-gradient tolerance");
    app.get_subcommand("m-curve")->add_option("--a-fractions", f.a_fractions, "Masses as fractions of a0");
    auto* ev = app.get_subcommand("evolve");
    ev->add_option("--a", f.a, "Mass of the generated datum");
    ev->add_option("--T", f.T, "Horizon");
    ev->add_option("--tau", f.tau, "Time step");
    ev->add_option("--phi", f.phi, "Initial datum (CHQF) when --initial file");
    ev->add_option("--initial", f.initial, "gaussian | ground_state | file");
    ev->add_option("--record-every", f.record_every, "Steps between records");
    ev->add_flag("--checkpoint", f.checkpoint, "Write a CHQF field at every record");
    auto* st = app.get_subcommand("stability");
    st->add_option("--a", f.a, "Prescribed mass");
    st->add_option("--T", f.T, "Horizon");
    st->add_option("--tau", f.tau, "Time step");
    st->add_option("--deltas", f.deltas, "Perturbation sizes");
    auto* pr = app.get_subcommand("probe");
    pr->add_option("--phi", f.phi, "Datum (CHQF); a Gaussian of the given H1 amplitude otherwise");
    pr->add_option("--T", f.T, "Horizon");
    pr->add_option("--iters", f.iters, "Picard iterations");
    pr->add_option("--pairs", f.pairs, "auto or m,n;m,n");
    pr->add_option("--amplitude", f.amplitude, "H1 norm of the Gaussian datum");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    std::string subcommand;
    for (auto* s : subs)
        if (s->parsed()) subcommand = s->get_name();

    choquard::RunOutcome outcome;
    try {
        const choquard::RunConfig cfg = choquard::parse_config(assemble(f, subcommand));
        outcome = choquard::run(cfg);
    } catch (const choquard::UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    }
    if (outcome.exit_code == 1) {
        std::cerr << "usage error: " << outcome.message << '\n';
        return 1;
    }
    std::cout << outcome.message << '\n';
    for (const auto& file : outcome.files) std::cout << "  wrote " << file << '\n';
    return outcome.exit_code;
}
