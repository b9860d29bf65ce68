// Computes the minimizer at half the threshold mass on a coarse wide box,
// evolves it and compares the measured phase rotation with its frequency.
#include <cstdio>

#include <choquard/choquard.hpp>

int main() {
    using namespace choquard;
    const ModelParams params = make_params(3, 2.0, 1.9);
    const LandscapeConstants c = compute_constants(params);
    const Grid g(3, 64, 256.0);
    const double a = 0.5 * c.a0;

    const GroundStateResult gs = find_ground_state(a, params, c, g);
    std::printf("a = %.6f  m(a) = %.6e  lambda = %.6e  |grad u|^2 = %.4e (rho0 = %.4e)  iterations = %zu\n", a, gs.m_a,
                gs.lambda, gs.rho_attained, c.rho0, gs.iterations);

    EvolveOptions eo;
    eo.reference = gs.u_a;
    const EvolutionTrace tr = evolve(gs.u_a, params, 5.0, 0.05, 10, eo);
    for (std::size_t i = 0; i < tr.times.size(); ++i)
        std::printf("t = %4.1f  mass = %.12f  energy = %.10e  orbit distance = %.2e\n", tr.times[i], tr.mass[i],
                    tr.energy[i], tr.orbit_dist[i]);
    std::printf("phase rate = %.8e, -lambda = %.8e\n", phase_rate(tr), -gs.lambda);
}
