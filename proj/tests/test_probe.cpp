#include <gtest/gtest.h>

#include <choquard/dynamics.hpp>
#include <choquard/probe.hpp>

using namespace choquard;

namespace {

const ModelParams P = make_params(3, 2.0, 1.9);

const Grid& small_grid() {
    static const Grid g(3, 32, 8.0);
    return g;
}

Field gaussian(const Grid& g, double width, double xi = 0.0) {
    return field_from(g, [&](const std::array<double, 3>& x) {
        return std::polar(std::exp(-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2 * width * width)), xi * x[0]);
    });
}

// Unit-width Gaussian scaled to the given H1 norm.
Field small_datum(double h1) {
    Field u = gaussian(small_grid(), 1.0);
    const double s = h1 / std::sqrt(h1_norm_sq(u));
    for (auto& v : u.values) v *= s;
    return u;
}

Trajectory free_trajectory(const Field& phi, double T, std::size_t nodes) {
    return detail::linear_trajectory(phi, nullptr, T, nodes, 1);
}

}  // namespace

TEST(AdmissiblePairs, Endpoint) {
    const AdmissiblePair p;
    EXPECT_TRUE(std::isinf(p.m));
    EXPECT_EQ(p.n, 2.0);
    for (int d : {1, 2, 3, 5}) EXPECT_TRUE(p.admissible(d));
    const nlohmann::json j = p;
    EXPECT_EQ(j["m"], "inf");
}

TEST(AdmissiblePairs, CriticalPairForAlphaOne) {
    const auto [p1, p2] = admissible_pairs(make_params(3, 1.0, 2.0));
    EXPECT_NEAR(p2.m, 10.0, 1e-12);
    EXPECT_NEAR(p2.n, 30.0 / 13.0, 1e-12);
    EXPECT_NEAR(2.0 / p2.m + 3.0 / p2.n, 1.5, 1e-12);
    EXPECT_NEAR(p1.m, 4.0, 1e-12);
    EXPECT_NEAR(p1.n, 3.0, 1e-12);
}

TEST(AdmissiblePairs, IdentityAcrossWindow) {
    for (double alpha : {0.5, 1.0, 2.0, 2.5})
        for (double q : {1.7, 1.9, 2.1}) {
            ModelParams p;
            try {
                p = make_params(3, alpha, q);
            } catch (const ParameterError&) {
                continue;
            }
            const auto [p1, p2] = admissible_pairs(p);
            EXPECT_LE(std::abs(p1.defect(3)), 1e-12);
            EXPECT_LE(std::abs(p2.defect(3)), 1e-12);
        }
}

TEST(MixedNorm, ConstantTrajectory) {
    const Field u = gaussian(small_grid(), 1.0);
    Trajectory t;
    for (int j = 0; j <= 8; ++j) {
        t.times.push_back(0.125 * j);
        t.states.push_back(u);
    }
    const MixedNormSpec spec{{{4.0, 3.0}, {}}, 1.0, false};
    const auto r = mixed_norm(t, spec);
    EXPECT_NEAR(r[0], lp_norm(u, 3.0), 1e-13);
    EXPECT_NEAR(r[1], lp_norm(u, 2.0), 1e-13);
    const MixedNormSpec half{{{4.0, 3.0}}, 0.5, true};
    EXPECT_NEAR(mixed_norm(t, half)[0], std::pow(0.5, 0.25) * spatial_norm(u, 3.0, true), 1e-13);
}

TEST(MixedNorm, QuadratureRefinement) {
    const Field phi = gaussian(small_grid(), 1.0);
    const MixedNormSpec spec{{{4.0, 3.0}, {10.0, 30.0 / 13.0}}, 0.5, true};
    const auto a = mixed_norm(free_trajectory(phi, 0.5, 256), spec);
    const auto b = mixed_norm(free_trajectory(phi, 0.5, 512), spec);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i] / b[i], 1.0, 1e-6);
}

TEST(MixedNorm, MonotoneInHorizon) {
    const Trajectory t = free_trajectory(gaussian(small_grid(), 1.0), 2.0, 64);
    const AdmissiblePair p{4.0, 3.0};
    for (double T : {0.25, 0.5, 1.0}) {
        const double a = mixed_norm(t, {{p}, T, false})[0];
        const double b = mixed_norm(t, {{p}, 2 * T, false})[0];
        EXPECT_LE(a, b);
    }
}

TEST(MixedNorm, Errors) {
    const Trajectory t = free_trajectory(gaussian(small_grid(), 1.0), 1.0, 16);
    EXPECT_THROW(mixed_norm(Trajectory{}, {{AdmissiblePair{}}, 1.0, false}), ParameterError);
    EXPECT_THROW(mixed_norm(t, {{AdmissiblePair{}}, 0.0, false}), ParameterError);
    EXPECT_THROW(mixed_norm(t, {{AdmissiblePair{}}, 0.33, false}), ParameterError);
    Trajectory bent = t;
    bent.times[3] += 0.01;
    EXPECT_THROW(mixed_norm(bent, {{AdmissiblePair{}}, 1.0, false}), ParameterError);
}

TEST(Strichartz, FinitePositiveAndHomogeneous) {
    const Field phi = gaussian(small_grid(), 1.0, 0.7);
    const auto [p1, p2] = admissible_pairs(P);
    const MixedNormSpec spec{{p1, p2}, 1.0, true};
    const auto r = strichartz_ratio(phi, Potential::zero(), spec);
    Field scaled(phi);
    for (auto& v : scaled.values) v *= cplx(-3.0, 2.0);
    const auto s = strichartz_ratio(scaled, Potential::zero(), spec);
    for (std::size_t i = 0; i < r.size(); ++i) {
        EXPECT_TRUE(std::isfinite(r[i]));
        EXPECT_GT(r[i], 0.0);
        EXPECT_NEAR(s[i] / r[i], 1.0, 1e-12);
    }
}

TEST(Strichartz, BatteryBounded) {
    const auto [p1, p2] = admissible_pairs(P);
    const StrichartzBattery b = strichartz_battery(small_grid(), Potential::zero(), {{p1, p2}, 1.0, true}, 20);
    ASSERT_EQ(b.ratios.size(), 20u);
    for (double s : b.spread) EXPECT_LT(s, 10.0);
}

TEST(Strichartz, WithPotential) {
    const auto [p1, p2] = admissible_pairs(P);
    const auto r = strichartz_ratio(gaussian(small_grid(), 1.0), Potential::gaussian_well(-0.5, 1.0),
                                    {{p1, p2}, 0.5, true}, 32);
    for (double v : r) EXPECT_TRUE(std::isfinite(v) && v > 0.0);
}

TEST(Picard, LinearProblemIsFixedPoint) {
    PicardOptions o;
    o.nonlinear = false;
    const PicardResult r = picard_iterate(small_datum(1e-2), Potential::zero(), P, 0.1, 5, o);
    ASSERT_FALSE(r.differences.empty());
    for (double d : r.differences) EXPECT_EQ(d, 0.0);
    EXPECT_EQ(r.status, "converged");
}

TEST(Picard, SmallDatumContractsAndMatchesSplitStep) {
    const Field phi = small_datum(1e-2);
    const PicardResult r = picard_iterate(phi, Potential::zero(), P, 0.1, 30);
    EXPECT_TRUE(r.contracting);
    EXPECT_NE(r.status, "outside contraction regime");
    for (double f : r.factors) EXPECT_LT(f, 0.5);
    const Field split = evolve(phi, P, 0.1, 1e-4, 1000000).final_state;
    Field diff(split);
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= r.trajectory.states.back()[i];
    EXPECT_LT(std::sqrt(mass(diff)), 1e-6);
    EXPECT_GT(r.rho0_smalldata, 0.0);
}

TEST(Picard, FactorGrowsWithAmplitude) {
    const PicardResult a = picard_iterate(small_datum(1e-2), Potential::zero(), P, 0.1, 4);
    const PicardResult b = picard_iterate(small_datum(2e-2), Potential::zero(), P, 0.1, 4);
    ASSERT_FALSE(a.factors.empty());
    ASSERT_FALSE(b.factors.empty());
    EXPECT_GT(b.factors.front(), a.factors.front());
    EXPECT_GT(b.rho0_smalldata, a.rho0_smalldata);
}

TEST(Picard, LargeDatumLeavesContractionRegime) {
    const PicardResult r = picard_iterate(small_datum(30.0), Potential::zero(), P, 0.5, 20);
    EXPECT_FALSE(r.contracting);
}

TEST(Picard, WithPotentialMatchesSplitStep) {
    const Field phi = small_datum(1e-2);
    const Potential V = Potential::gaussian_well(-0.5, 1.0);
    PicardOptions o;
    o.substeps = 16;
    const PicardResult r = picard_iterate(phi, V, P, 0.1, 30, o);
    EXPECT_TRUE(r.contracting);
    const Field split = evolve(phi, V, P, 0.1, 1e-4, 1000000).final_state;
    Field diff(split);
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= r.trajectory.states.back()[i];
    EXPECT_LT(std::sqrt(mass(diff)), 1e-6);
}

TEST(BilinearHls, DilationInvariant) {
    const Grid g(3, 64, 12.0);
    auto bump = [&](double w, double s) {
        RealVec f(g.size());
        for_each_node(g, [&](std::size_t i, const std::array<double, 3>& x) {
            const double r2 = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (s * s);
            f[i] = std::exp(-r2 / (2 * w * w));
        });
        return f;
    };
    const double base = bilinear_hls_quotient(g, bump(1.0, 1.0), bump(0.8, 1.0), 2.0, 2.0, 2.0);
    EXPECT_GT(base, 0.0);
    for (double s : {0.8, 1.25}) {
        const double q = bilinear_hls_quotient(g, bump(1.0, s), bump(0.8, s), 2.0, 2.0, 2.0);
        EXPECT_NEAR(q / base, 1.0, 1e-4) << "s = " << s;
    }
    EXPECT_THROW(bilinear_hls_quotient(g, bump(1, 1), bump(1, 1), 2.0, 1.0, 1.0), ParameterError);
}
