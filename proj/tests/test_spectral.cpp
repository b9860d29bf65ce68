#include <gtest/gtest.h>

#include <random>

#include <choquard/params.hpp>
#include <choquard/spectral.hpp>

#include "oracles.hpp"

using namespace choquard;

namespace {

double r2_of(const std::array<double, 3>& x) { return x[0] * x[0] + x[1] * x[1] + x[2] * x[2]; }

Field gaussian(const Grid& g, double b) {
    return field_from(g, [b](const std::array<double, 3>& x) { return cplx(std::exp(-b * r2_of(x)), 0.0); });
}

Field random_smooth(const Grid& g, std::uint64_t seed, double width = 1.5) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::array<double, 3> c{nd(rng), nd(rng), nd(rng)};
    const cplx amp(nd(rng), nd(rng));
    const cplx amp2(nd(rng), nd(rng));
    return field_from(g, [&](const std::array<double, 3>& x) {
        double r2 = 0.0, s2 = 0.0;
        for (int a = 0; a < g.d; ++a) {
            r2 += (x[a] - 0.5 * c[a]) * (x[a] - 0.5 * c[a]);
            s2 += (x[a] + 0.3 * c[a]) * (x[a] + 0.3 * c[a]);
        }
        return amp * std::exp(-r2 / (2 * width * width)) + amp2 * x[0] * std::exp(-s2 / (width * width));
    });
}

}  // namespace

TEST(Grid, Invariants) {
    const Grid g(3, 64, 12.0);
    EXPECT_DOUBLE_EQ(g.h() * static_cast<double>(g.n), 2.0 * g.L);
    EXPECT_EQ(g.size(), 64u * 64u * 64u);
    EXPECT_THROW(Grid(3, 48, 12.0), ParameterError);
    EXPECT_THROW(Grid(3, 4, 12.0), ParameterError);
    EXPECT_THROW(Grid(4, 8, 12.0), ParameterError);
    EXPECT_THROW(Grid(3, 8, -1.0), ParameterError);
    EXPECT_DOUBLE_EQ(g.wavenumber(1), std::numbers::pi / 12.0);
    EXPECT_DOUBLE_EQ(g.wavenumber(63), -std::numbers::pi / 12.0);
}

TEST(ModelParams, Window) {
    const ModelParams p = make_params(3, 2.0, 1.9);
    EXPECT_DOUBLE_EQ(p.two_star(), 4.0);
    EXPECT_GT(p.two_star(), 1.0);
    EXPECT_NEAR(p.q_lower(), 4.0 / 3.0, 1e-15);
    EXPECT_NEAR(p.q_upper(), 2.0, 1e-15);
    EXPECT_THROW(make_params(3, 2.0, 2.0), ParameterError);
    EXPECT_THROW(make_params(3, 2.0, 1.3), ParameterError);
    EXPECT_THROW(make_params(3, 3.0, 1.9), ParameterError);
    EXPECT_THROW(make_params(2, 1.0, 1.9), ParameterError);
}

TEST(LatticeZeta, MatchesThetaIntegral) {
    EXPECT_NEAR(lattice_zeta(3, 2.0), oracle::zeta3_2, 1e-10);
    EXPECT_NEAR(lattice_zeta(3, 0.5), oracle::zeta3_half, 1e-10);
    EXPECT_NEAR(lattice_zeta(3, -0.5), oracle::zeta3_minus_half, 1e-10);
    EXPECT_DOUBLE_EQ(lattice_zeta(3, 0.0), -1.0);
}

TEST(RieszConvolve, ZeroInZeroOut) {
    const Grid g(3, 16, 4.0);
    const Field z(g);
    const Field r = riesz_convolve(z, 2.0);
    for (const auto& v : r.values) EXPECT_EQ(std::abs(v), 0.0);
}

TEST(RieszConvolve, RejectsOrderOutsideWindow) {
    const Grid g(3, 16, 4.0);
    const Field z(g);
    EXPECT_THROW(riesz_convolve(z, 0.0), ParameterError);
    EXPECT_THROW(riesz_convolve(z, 3.0), ParameterError);
}

TEST(RieszConvolve, GaussianRadialOracle) {
    const Grid g(3, 128, 12.0);
    const Field f = gaussian(g, 1.0);
    const Field r = riesz_convolve(f, 2.0);
    const double oracle0 = oracle::riesz_constant(3, 2.0) * 4.0 * oracle::pi * oracle::gaussian_riesz2_at_origin(1.0);
    const std::size_t center = (g.n / 2) * g.n * g.n + (g.n / 2) * g.n + g.n / 2;
    EXPECT_NEAR(r[center].real() / oracle0 - 1.0, 0.0, 1e-3);
    // Periodic images bend the far field, so only the core is held to the free-space potential.
    auto worst_within = [](const Grid& h, double radius) {
        const Field rr = riesz_convolve(gaussian(h, 1.0), 2.0);
        double w = 0.0;
        for_each_node(h, [&](std::size_t i, const std::array<double, 3>& x) {
            const double dist = std::sqrt(r2_of(x));
            if (dist <= radius) w = std::max(w, std::abs(rr[i].real() - oracle::gaussian_newton_potential(dist)));
        });
        return w;
    };
    const Grid wide(3, 128, 24.0);
    EXPECT_LT(worst_within(wide, 1.0), 1e-8);
    EXPECT_LT(worst_within(wide, 4.0), 1e-5);
    EXPECT_LT(worst_within(wide, 1e9), 0.6 * worst_within(g, 1e9));
}

TEST(RieszConvolve, UncorrectedSurrogateCarriesBoxBias) {
    const Grid g(3, 64, 12.0);
    const Field f = gaussian(g, 1.0);
    const Field plain = riesz_convolve(f, 2.0, LatticeCorrection::none);
    const Field mean = riesz_convolve(f, 2.0, LatticeCorrection::mean);
    const std::size_t center = (g.n / 2) * g.n * g.n + (g.n / 2) * g.n + g.n / 2;
    const double e_plain = std::abs(plain[center].real() - 0.5);
    const double e_mean = std::abs(mean[center].real() - 0.5);
    EXPECT_GT(e_plain, 1e-3);
    EXPECT_LT(e_mean, e_plain * 1e-2);
}

TEST(RieszConvolve, MultiplierComposition) {
    const Grid g(3, 32, 6.0);
    const Field f = random_smooth(g, 3);
    const Field a = riesz_convolve(riesz_convolve(f, 0.7, LatticeCorrection::none), 1.1, LatticeCorrection::none);
    const Field b = riesz_convolve(f, 1.8, LatticeCorrection::none);
    ComplexVec sa = spectrum(a), sb = spectrum(b);
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 1; i < sa.size(); ++i) {
        worst = std::max(worst, std::abs(sa[i] - sb[i]));
        scale = std::max(scale, std::abs(sb[i]));
    }
    EXPECT_LT(worst, 1e-12 * scale);
}

TEST(RieszConvolve, SelfAdjointAndPositive) {
    const Grid g(3, 32, 6.0);
    RealVec f(g.size()), h(g.size());
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    for (auto& v : f) v = nd(rng);
    for (auto& v : h) v = nd(rng);
    double mf = 0.0;
    for (double v : f) mf += v;
    for (auto& v : f) v -= mf / static_cast<double>(f.size());
    const RealVec If = riesz_convolve_real(g, f, 1.5, LatticeCorrection::none);
    const RealVec Ih = riesz_convolve_real(g, h, 1.5, LatticeCorrection::none);
    double ff = 0.0, fh = 0.0, hf = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        ff += If[i] * f[i];
        fh += If[i] * h[i];
        hf += f[i] * Ih[i];
    }
    EXPECT_GE(ff, 0.0);
    EXPECT_NEAR(fh, hf, 1e-10 * std::abs(fh));
}

TEST(RieszConvolve, RealAndComplexPathsAgree) {
    const Grid g(3, 32, 6.0);
    const Field f = gaussian(g, 0.7);
    RealVec fr(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) fr[i] = f[i].real();
    const RealVec a = riesz_convolve_real(g, fr, 2.0);
    const Field b = riesz_convolve(f, 2.0);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(a[i], b[i].real(), 1e-12);
}

TEST(Norms, GradientOfConstantVanishes) {
    const Grid g(3, 16, 4.0);
    Field u(g);
    for (auto& v : u.values) v = cplx(2.0, -1.0);
    EXPECT_NEAR(gradient_norm_sq(u), 0.0, 1e-20);
}

TEST(Norms, GradientOfSingleMode) {
    const Grid g(3, 16, 4.0);
    const double k = 3.0 * g.dk();
    Field u = field_from(g, [k](const std::array<double, 3>& x) { return std::polar(1.0, k * x[0]); });
    const double m = mass(u);
    for (auto& v : u.values) v /= std::sqrt(m);
    EXPECT_NEAR(gradient_norm_sq(u), k * k, 1e-12 * k * k);
}

TEST(Norms, GradientOfGaussianClosedForm) {
    const Grid g(3, 128, 12.0);
    const Field u = gaussian(g, 0.5);
    EXPECT_NEAR(gradient_norm_sq(u) / (1.5 * std::pow(oracle::pi, 1.5)), 1.0, 1e-10);
}

TEST(Norms, LpOfSingleSample) {
    const Grid g(3, 16, 4.0);
    Field u(g);
    u[123] = cplx(0.0, 3.0);
    for (double p : {1.0, 2.0, 3.5}) EXPECT_NEAR(lp_norm(u, p), 3.0 * std::pow(g.h(), 3.0 / p), 1e-13);
    EXPECT_DOUBLE_EQ(lp_norm(u, std::numeric_limits<double>::infinity()), 3.0);
    EXPECT_THROW(lp_norm(u, 0.5), ParameterError);
}

TEST(Norms, GaussianL2ClosedForm) {
    const Grid g(3, 128, 12.0);
    const Field u = gaussian(g, 1.0);
    EXPECT_NEAR(lp_norm(u, 2.0), std::pow(oracle::pi / 2.0, 0.75), 1e-10);
}

TEST(Norms, Parseval) {
    const Grid g(3, 32, 6.0);
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Field u = random_smooth(g, s);
        EXPECT_NEAR(mass(u), plancherel_norm_sq(u), 1e-12 * mass(u));
    }
}

TEST(Norms, SpectralAccuracyUnderRefinement) {
    const Field a = gaussian(Grid(3, 64, 12.0), 0.5);
    const Field b = gaussian(Grid(3, 128, 12.0), 0.5);
    EXPECT_NEAR(gradient_norm_sq(a), gradient_norm_sq(b), 1e-10 * gradient_norm_sq(b));
    EXPECT_NEAR(lp_norm(a, 3.0), lp_norm(b, 3.0), 1e-10);
}

TEST(H1Inner, DefinitionAndSymmetry) {
    const Grid g(3, 32, 6.0);
    const Field u = random_smooth(g, 1), v = random_smooth(g, 2);
    const cplx uu = h1_inner(u, u);
    EXPECT_NEAR(uu.imag(), 0.0, 1e-12 * uu.real());
    EXPECT_NEAR(uu.real(), mass(u) + gradient_norm_sq(u), 1e-12 * uu.real());
    const cplx uv = h1_inner(u, v), vu = h1_inner(v, u);
    EXPECT_NEAR(std::abs(uv - std::conj(vu)), 0.0, 1e-12 * std::abs(uv));
    EXPECT_THROW(h1_inner(u, Field(Grid(3, 16, 6.0))), GridMismatch);
}

TEST(H1Inner, OrthogonalModes) {
    const Grid g(3, 16, 4.0);
    const double k = g.dk();
    const Field a = field_from(g, [k](const std::array<double, 3>& x) { return std::polar(1.0, k * x[0]); });
    const Field b = field_from(g, [k](const std::array<double, 3>& x) { return std::polar(1.0, 2.0 * k * x[1]); });
    EXPECT_NEAR(std::abs(h1_inner(a, b)), 0.0, 1e-12);
}

TEST(Derivatives, LaplacianOfModeExact) {
    const Grid g(3, 16, 4.0);
    for (int m : {1, 5, 7}) {
        const double k = m * g.dk();
        const Field u = field_from(g, [k](const std::array<double, 3>& x) { return std::polar(1.0, k * x[2]); });
        const Field lap = laplacian(u);
        for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(std::abs(lap[i] + k * k * u[i]), 0.0, 1e-12 * k * k);
    }
}

TEST(Symmetries, ShiftAndModulate) {
    const Grid g(3, 32, 6.0);
    const Field u = random_smooth(g, 4);
    const Field id = modulate(shift(u, {0, 0, 0}), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(id[i], u[i]);
    const Field s = shift(u, {3, -5, 2});
    EXPECT_NEAR(mass(s), mass(u), 1e-13 * mass(u));
    EXPECT_NEAR(gradient_norm_sq(s), gradient_norm_sq(u), 1e-12 * gradient_norm_sq(u));
    EXPECT_NEAR(lp_norm(s, 3.0), lp_norm(u, 3.0), 1e-13);
    const Field m = modulate(u, 1.3);
    EXPECT_NEAR(mass(m), mass(u), 1e-13 * mass(u));
    // shift moves samples: s(x) = u(x - y h)
    const std::size_t n = g.n;
    EXPECT_NEAR(std::abs(s[(3 * n + (n - 5)) * n + 2] - u[0]), 0.0, 1e-12);
}

TEST(Powers, ModulusPowerMatchesPow) {
    const Grid g(3, 16, 4.0);
    const Field u = random_smooth(g, 9);
    for (double p : {1.9, 2.0, 4.0, 2.85}) {
        const RealVec f = modulus_power(u, p);
        for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(f[i], std::pow(std::abs(u[i]), p), 1e-12 * (1 + f[i]));
    }
}
