#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <choquard/run.hpp>

using namespace choquard;
namespace fs = std::filesystem;

namespace {

struct Invocation {
    int exit_code = -1;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("choquard_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Invocation cli(const std::string& args, const fs::path& dir) {
    const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = std::string(CHOQUARD_CLI_PATH) + " " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    Invocation r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const fs::path p = dir / "config.json";
    std::ofstream(p) << text;
    return p;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

// Relative agreement of every number in two JSON documents.
void expect_numbers_close(const nlohmann::json& a, const nlohmann::json& b, const std::string& path = "") {
    ASSERT_EQ(a.type(), b.type()) << path;
    if (a.is_object()) {
        for (const auto& [k, v] : a.items()) {
            ASSERT_TRUE(b.contains(k)) << path << "/" << k;
            expect_numbers_close(v, b.at(k), path + "/" + k);
        }
    } else if (a.is_array()) {
        ASSERT_EQ(a.size(), b.size()) << path;
        for (std::size_t i = 0; i < a.size(); ++i) expect_numbers_close(a[i], b[i], path + "/" + std::to_string(i));
    } else if (a.is_number()) {
        const double x = a.get<double>(), y = b.get<double>();
        EXPECT_LE(std::abs(x - y), 1e-12 * std::max(std::abs(x), std::abs(y))) << path;
    } else if (path.find("output_dir") == std::string::npos) {
        EXPECT_EQ(a, b) << path;
    }
}

}  // namespace

TEST(Config, KeyNamedErrors) {
    auto key_of = [](const nlohmann::json& raw) {
        try {
            parse_config(raw);
        } catch (const UsageError& e) {
            return e.key();
        }
        return std::string("<none>");
    };
    EXPECT_EQ(key_of(nlohmann::json::object()), "experiment");
    EXPECT_EQ(key_of({{"experiment", "nope"}}), "experiment");
    EXPECT_EQ(key_of({{"experiment", "landscape"}, {"bogus", 1}}), "bogus");
    EXPECT_EQ(key_of({{"experiment", "landscape"}, {"params", {{"q", 5.0}}}}), "params.q");
    EXPECT_EQ(key_of({{"experiment", "landscape"}, {"params", {{"alpha", 3.0}}}}), "params.alpha");
    EXPECT_EQ(key_of({{"experiment", "landscape"}, {"params", {{"d", 2}}}}), "params.d");
    EXPECT_EQ(key_of({{"experiment", "landscape"}, {"params", {{"q", "x"}}}}), "params.q");
    EXPECT_EQ(key_of({{"experiment", "evolve"}, {"grid", {{"n", 0}}}}), "grid");
    EXPECT_EQ(key_of({{"experiment", "kato"}, {"potential", "square:depth=1"}}), "potential");
    EXPECT_EQ(key_of({{"experiment", "evolve"}, {"options", {{"tau", "fast"}}}}), "options.tau");
    EXPECT_EQ(key_of({{"experiment", "evolve"}, {"options", {{"iters", 3}}}}), "options.iters");
    EXPECT_EQ(key_of({{"experiment", "evolve"}, {"threads", 0}}), "threads");
}

TEST(Config, DefaultsFilled) {
    const RunConfig c = parse_config({{"experiment", "stability"}});
    EXPECT_EQ(c.params.d, 3);
    EXPECT_EQ(c.params.alpha, 2.0);
    EXPECT_EQ(c.params.q, 1.9);
    EXPECT_EQ(c.options["deltas"].size(), 3u);
    EXPECT_EQ(c.options["T"].get<double>(), 10.0);
    const nlohmann::json j = c;
    EXPECT_EQ(j["experiment"], "stability");
}

TEST(Cli, EmptyConfigIsUsageError) {
    const fs::path dir = scratch("empty");
    const Invocation r = cli("--config " + write_config(dir, "{}").string(), dir);
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.err.find("experiment"), std::string::npos) << r.err;
}

TEST(Cli, MalformedConfigIsUsageError) {
    const fs::path dir = scratch("malformed");
    const Invocation r = cli("--config " + write_config(dir, "{\"experiment\": ").string(), dir);
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.err.find("config"), std::string::npos) << r.err;
}

TEST(Cli, BadValueNamesKey) {
    const fs::path dir = scratch("badq");
    const Invocation r = cli("landscape --q 7 --out " + dir.string(), dir);
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.err.find("params.q"), std::string::npos) << r.err;
    const Invocation s =
        cli("--config " + write_config(dir, R"({"experiment":"evolve","options":{"taux":1}})").string(), dir);
    EXPECT_EQ(s.exit_code, 1);
    EXPECT_NE(s.err.find("options.taux"), std::string::npos) << s.err;
}

TEST(Cli, ExperimentConflict) {
    const fs::path dir = scratch("conflict");
    const Invocation r =
        cli("--config " + write_config(dir, R"({"experiment":"kato"})").string() + " landscape", dir);
    EXPECT_EQ(r.exit_code, 1);
}

TEST(Cli, LandscapePasses) {
    const fs::path dir = scratch("landscape");
    const Invocation r = cli("landscape --out " + dir.string(), dir);
    ASSERT_EQ(r.exit_code, 0) << r.out << r.err;
    const nlohmann::json j = read_json(dir / "landscape.json");
    const auto& tri = j["result"]["trichotomy"];
    for (const char* k : {"half_a0_positive", "a0_zero", "two_a0_negative"}) EXPECT_TRUE(tri[k].get<bool>()) << k;
    EXPECT_TRUE(j["checks"]["constants_stamp_unchanged"].get<bool>());
    EXPECT_EQ(j["status"], "pass");
    EXPECT_TRUE(j.contains("config"));
    EXPECT_TRUE(j.contains("constants"));
    const std::string csv = slurp(dir / "landscape.csv");
    EXPECT_EQ(csv.rfind("# config: ", 0), 0u);
    EXPECT_NE(csv.find("\n# constants: "), std::string::npos);
}

TEST(Cli, GroundStateAboveThreshold) {
    const fs::path dir = scratch("above");
    const Invocation r = cli("ground-state --a 3.0 --n 16 --L 64 --out " + dir.string(), dir);
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.err.find("above threshold a0"), std::string::npos) << r.err;
}

TEST(Cli, KatoReport) {
    const fs::path dir = scratch("kato");
    // ||V_-||_{3/2} = 2 pi w^2 D / 1.5, about 8.4 here, above S = 5.48
    const Invocation deep =
        cli("kato --potential gaussian_well:depth=-0.5,width=2 --n 32 --L 8 --out " + dir.string(), dir);
    EXPECT_EQ(deep.exit_code, 2) << deep.err;
    const nlohmann::json j = read_json(dir / "kato.json");
    EXPECT_NEAR(j["result"]["conditions"]["kato_threshold"].get<double>(), 4.0 * std::numbers::pi, 1e-12);
    EXPECT_EQ(j["result"]["conditions"]["sobolev_condition"], "fail");
    EXPECT_EQ(j["status"], "fail");

    const Invocation shallow =
        cli("kato --potential gaussian_well:depth=-0.05,width=1 --n 32 --L 8 --out " + dir.string(), dir);
    EXPECT_EQ(shallow.exit_code, 0) << shallow.err;
    EXPECT_EQ(read_json(dir / "kato.json")["status"], "pass");
}

TEST(Cli, GroundStateReproducibleAndStamped) {
    const fs::path a = scratch("gs_a"), b = scratch("gs_b");
    const std::string args = "ground-state --n 32 --L 128 --seed 7 --out ";
    ASSERT_EQ(cli(args + a.string(), a).exit_code, 0);
    ASSERT_EQ(cli(args + b.string(), b).exit_code, 0);
    const nlohmann::json ja = read_json(a / "ground-state.json"), jb = read_json(b / "ground-state.json");
    expect_numbers_close(ja, jb);
    const std::string meta = load_field_metadata((a / "ground_state.chqf").string());
    const nlohmann::json prov = nlohmann::json::parse(meta);
    EXPECT_EQ(prov["constants"], ja["constants"]);
    EXPECT_EQ(prov["config"]["experiment"], "ground-state");
}

TEST(Cli, EvolveWithCheckpoints) {
    const fs::path dir = scratch("evolve");
    const Invocation r =
        cli("evolve --n 16 --L 8 --T 0.05 --tau 0.01 --record-every 1 --checkpoint --out " + dir.string(), dir);
    ASSERT_EQ(r.exit_code, 0) << r.out << r.err;
    std::size_t fields = 0;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".chqf") ++fields;
    EXPECT_GE(fields, 6u);
    const std::string csv = slurp(dir / "evolve.csv");
    EXPECT_NE(csv.find("orbit_dist"), std::string::npos);
}

TEST(Run, LibraryEntryPoint) {
    nlohmann::json raw{{"experiment", "constants"}, {"output_dir", scratch("lib").string()}};
    const RunOutcome o = run(parse_config(raw));
    EXPECT_EQ(o.exit_code, 0) << o.message;
    EXPECT_FALSE(o.files.empty());
    EXPECT_NEAR(o.summary["constants"]["a0"].get<double>(), 2.0735728597, 1e-8);
}
