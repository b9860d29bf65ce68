#pragma once

#include <cmath>
#include <string>

#include "errors.hpp"

namespace choquard {

// Dimension, Riesz order and subcritical exponent of the Choquard model.
// Kernel convention throughout: the nonlocal terms use |x|^{-alpha}.
struct ModelParams {
    int d = 3;
    double alpha = 2.0;
    double q = 1.9;

    double two_star() const { return (2.0 * d - alpha) / (d - 2.0); }
    double q_lower() const { return (2.0 * d - alpha) / d; }
    double q_upper() const { return (2.0 * d - alpha + 2.0) / d; }

    // d(q-2)+alpha: homogeneity of D_q under u_s(x) = s^{d/2} u(sx).
    double subcrit_scaling() const { return d * (q - 2.0) + alpha; }

    void validate() const {
        if (d < 3) throw ParameterError("d must be >= 3, got " + std::to_string(d));
        if (!(alpha > 0.0 && alpha < d))
            throw ParameterError("alpha must lie in (0, d), got " + std::to_string(alpha));
        if (!(q > q_lower() && q < q_upper()))
            throw ParameterError("q must lie in (" + std::to_string(q_lower()) + ", " +
                                 std::to_string(q_upper()) + "), got " + std::to_string(q));
    }
};

inline ModelParams make_params(int d, double alpha, double q) {
    ModelParams p{d, alpha, q};
    p.validate();
    return p;
}

}  // namespace choquard
