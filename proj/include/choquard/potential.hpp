#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>

#include <boost/math/special_functions/gamma.hpp>
#include <nlohmann/json.hpp>

#include "io.hpp"
#include "landscape.hpp"
#include "lattice_zeta.hpp"
#include "spectral.hpp"

namespace choquard {

struct PotentialNorms {
    double kato = 0.0;
    double neg_kato = 0.0;
    double lp_halfd = 0.0;
    double neg_lp_halfd = 0.0;
};

// External potential V. Closed-form kinds are sampled on demand; norms are
// cached per grid.
class Potential {
public:
    enum class Kind { zero, gaussian_well, yukawa, grid_sampled };

    Potential() = default;

    static Potential zero() { return Potential(); }

    // depth * exp(-|x|^2 / (2 width^2)).
    static Potential gaussian_well(double depth, double width) {
        if (!(width > 0.0)) throw ParameterError("gaussian_well width must be positive");
        Potential v;
        v.kind_ = Kind::gaussian_well;
        v.a_ = depth;
        v.b_ = width;
        return v;
    }

    // strength * exp(-|x| / range) / |x|.
    static Potential yukawa(double strength, double range) {
        if (!(range > 0.0)) throw ParameterError("yukawa range must be positive");
        Potential v;
        v.kind_ = Kind::yukawa;
        v.a_ = strength;
        v.b_ = range;
        return v;
    }

    static Potential grid_sampled(Field samples) {
        Potential v;
        v.kind_ = Kind::grid_sampled;
        v.samples_ = std::make_shared<const Field>(std::move(samples));
        return v;
    }

    Kind kind() const { return kind_; }
    double first() const { return a_; }
    double second() const { return b_; }
    const Field* samples() const { return samples_.get(); }
    bool is_zero() const { return kind_ == Kind::zero; }

    Potential scaled(double c) const {
        Potential v = *this;
        v.cache_.reset();
        if (kind_ == Kind::grid_sampled) {
            Field s = *samples_;
            for (auto& x : s.values) x *= c;
            v.samples_ = std::make_shared<const Field>(std::move(s));
        } else {
            v.a_ *= c;
        }
        return v;
    }

    std::string describe() const {
        std::ostringstream os;
        os.precision(17);
        switch (kind_) {
            case Kind::zero: return "zero";
            case Kind::gaussian_well: os << "gaussian_well:depth=" << a_ << ",width=" << b_; break;
            case Kind::yukawa: os << "yukawa:strength=" << a_ << ",range=" << b_; break;
            case Kind::grid_sampled: os << "grid_sampled:" << samples_->grid.describe(); break;
        }
        return os.str();
    }

    struct Cache {
        Grid grid;
        PotentialNorms norms;
    };
    std::shared_ptr<Cache>& cache() const { return cache_; }

private:
    Kind kind_ = Kind::zero;
    double a_ = 0.0, b_ = 1.0;
    std::shared_ptr<const Field> samples_;
    mutable std::shared_ptr<Cache> cache_;
};

// Lattice-corrected self weight of the 1/|y| singularity at a node: the
// trapezoid sum over y != 0 of h^d/|y| plus this weight reproduces the
// integral of any smooth compactly supported f(y)/|y| to second order.
inline double singular_self_weight(const Grid& g) {
    if (g.d < 2) throw ParameterError("1/|x| singularity is not integrable for d < 2");
    return -lattice_zeta(g.d, 0.5) * std::pow(g.h(), g.d - 1);
}

inline Field sample(const Potential& V, const Grid& g) {
    using Kind = Potential::Kind;
    switch (V.kind()) {
        case Kind::zero: return Field(g);
        case Kind::grid_sampled:
            require_same_grid(V.samples()->grid, g);
            return *V.samples();
        case Kind::gaussian_well: {
            const double depth = V.first(), w2 = 2.0 * V.second() * V.second();
            return field_from(g, [&](const std::array<double, 3>& x) {
                return cplx(depth * std::exp(-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / w2), 0.0);
            });
        }
        case Kind::yukawa: {
            const double strength = V.first(), range = V.second();
            const double node = strength * singular_self_weight(g) / g.cell();
            return field_from(g, [&](const std::array<double, 3>& x) {
                const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
                return cplx(r > 0.0 ? strength * std::exp(-r / range) / r : node, 0.0);
            });
        }
    }
    return Field(g);
}

namespace detail {

// sup_x sum_y h^3 w(y) / |x - y| with the singular self weight on the diagonal,
// by aperiodic convolution on the zero-padded (2n)^3 box.
inline double kato_sup(const Grid& g, const RealVec& w) {
    if (g.d != 3) throw ParameterError("Kato quadrature is implemented for d = 3 only");
    const std::size_t n = g.n, m = 2 * n;
    const std::vector<int> dims(3, static_cast<int>(m));
    const std::size_t total = m * m * m, half = m * m * (m / 2 + 1);
    RealVec data(total, 0.0), kernel(total, 0.0);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t c = 0; c < n; ++c) data[(a * m + b) * m + c] = w[(a * n + b) * n + c];
    const double h = g.h(), cell = g.cell(), self = singular_self_weight(g);
    auto offset = [m](std::size_t i) { return i < m / 2 ? static_cast<double>(i) : static_cast<double>(i) - m; };
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b)
            for (std::size_t c = 0; c < m; ++c) {
                const double r = h * std::sqrt(offset(a) * offset(a) + offset(b) * offset(b) + offset(c) * offset(c));
                kernel[(a * m + b) * m + c] = r > 0.0 ? cell / r : self;
            }
    ComplexVec sd(half), sk(half);
    fft_r2c(dims, data.data(), sd.data());
    fft_r2c(dims, kernel.data(), sk.data());
    const double inv = 1.0 / static_cast<double>(total);
    for (std::size_t i = 0; i < half; ++i) sd[i] *= sk[i] * inv;
    fft_c2r(dims, sd.data(), data.data());
    double best = 0.0;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t c = 0; c < n; ++c) best = std::max(best, data[(a * m + b) * m + c]);
    return best;
}

inline double halfd_norm(const Grid& g, const RealVec& w) { return lp_norm_real(g, w, g.d / 2.0); }

}  // namespace detail

// ||V||_K = sup_x int |V(y)| / |x - y| dy over grid nodes.
inline double kato_norm(const Potential& V, const Grid& g) {
    if (g.d != 3) throw ParameterError("Kato quadrature is implemented for d = 3 only");
    if (V.is_zero()) return 0.0;
    const Field s = sample(V, g);
    RealVec w(g.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::abs(s[i].real());
    return detail::kato_sup(g, w);
}

inline PotentialNorms potential_norms(const Potential& V, const Grid& g) {
    auto& cache = V.cache();
    if (cache && cache->grid == g) return cache->norms;
    PotentialNorms out;
    if (!V.is_zero()) {
        const Field s = sample(V, g);
        RealVec all(g.size()), neg(g.size());
        for (std::size_t i = 0; i < all.size(); ++i) {
            all[i] = std::abs(s[i].real());
            neg[i] = std::max(-s[i].real(), 0.0);
        }
        out.lp_halfd = detail::halfd_norm(g, all);
        out.neg_lp_halfd = detail::halfd_norm(g, neg);
        if (g.d == 3) {
            out.kato = detail::kato_sup(g, all);
            bool any_negative = false;
            for (double v : neg) any_negative = any_negative || v > 0.0;
            out.neg_kato = any_negative ? detail::kato_sup(g, neg) : 0.0;
        } else {
            out.kato = out.neg_kato = std::numeric_limits<double>::quiet_NaN();
        }
    }
    cache = std::make_shared<Potential::Cache>(Potential::Cache{g, out});
    return out;
}

// ||V_-||_{d/2}, the quantity injected into the landscape constants.
inline double negative_part_halfd_norm(const Potential& V, const Grid& g) {
    if (V.is_zero()) return 0.0;
    const Field s = sample(V, g);
    RealVec neg(g.size());
    for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = std::max(-s[i].real(), 0.0);
    return detail::halfd_norm(g, neg);
}

// d(d-2) times the unit-ball volume.
inline double kato_threshold(int d) {
    return d * (d - 2.0) * std::pow(std::numbers::pi, d / 2.0) / boost::math::tgamma(d / 2.0 + 1.0);
}

enum class ConditionStatus { pass, marginal, fail };

inline const char* to_string(ConditionStatus s) {
    switch (s) {
        case ConditionStatus::pass: return "pass";
        case ConditionStatus::marginal: return "marginal";
        case ConditionStatus::fail: return "fail";
    }
    return "fail";
}

struct ConditionReport {
    PotentialNorms norms;
    double kato_threshold = 0.0;
    double sobolev_S = 0.0;
    bool kato_lhalfd_finite = false;
    bool neg_kato_below_threshold = false;
    ConditionStatus sobolev_condition = ConditionStatus::fail;
    std::string note;

    bool passed() const {
        return kato_lhalfd_finite && neg_kato_below_threshold && sobolev_condition == ConditionStatus::pass;
    }
};

inline void to_json(nlohmann::json& j, const ConditionReport& r) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    j = nlohmann::json{{"kato_norm", num(r.norms.kato)},
                       {"neg_kato_norm", num(r.norms.neg_kato)},
                       {"lp_halfd_norm", num(r.norms.lp_halfd)},
                       {"neg_lp_halfd_norm", num(r.norms.neg_lp_halfd)},
                       {"kato_threshold", r.kato_threshold},
                       {"sobolev_S", r.sobolev_S},
                       {"kato_lhalfd_finite", r.kato_lhalfd_finite},
                       {"neg_kato_below_threshold", r.neg_kato_below_threshold},
                       {"sobolev_condition", to_string(r.sobolev_condition)},
                       {"passed", r.passed()},
                       {"note", r.note}};
}

// Relative band inside which ||V_-||_{d/2} = S counts as equality.
inline constexpr double marginal_band = 1e-12;

inline ConditionReport check_conditions(const Potential& V, const Grid& g, const LandscapeConstants& c,
                                        const ModelParams& params) {
    if (g.d != params.d) throw GridMismatch("grid dimension differs from model dimension");
    ConditionReport r;
    r.norms = potential_norms(V, g);
    r.kato_threshold = kato_threshold(params.d);
    r.sobolev_S = c.sobolev_S;
    r.kato_lhalfd_finite = std::isfinite(r.norms.kato) && std::isfinite(r.norms.lp_halfd);
    r.neg_kato_below_threshold = std::isfinite(r.norms.neg_kato) && r.norms.neg_kato < r.kato_threshold;
    const double gap = r.norms.neg_lp_halfd - c.sobolev_S;
    if (std::abs(gap) <= marginal_band * c.sobolev_S) {
        r.sobolev_condition = ConditionStatus::marginal;
        r.note = "marginal: coercivity constant degenerates at ||V_-||_{d/2} = S";
    } else {
        r.sobolev_condition = gap < 0.0 ? ConditionStatus::pass : ConditionStatus::fail;
    }
    if (g.d != 3) r.note = "Kato quadrature unavailable for d != 3";
    return r;
}

namespace detail {

inline std::map<std::string, double> parse_kv(const std::string& body, const std::string& spec) {
    std::map<std::string, double> out;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ParameterError("potential spec '" + spec + "': expected key=value");
        const std::string key = item.substr(0, eq);
        try {
            std::size_t used = 0;
            const std::string val = item.substr(eq + 1);
            out[key] = std::stod(val, &used);
            if (used != val.size()) throw std::invalid_argument(val);
        } catch (const std::exception&) {
            throw ParameterError("potential spec '" + spec + "': bad number for " + key);
        }
    }
    return out;
}

inline double take(std::map<std::string, double>& kv, const std::string& key, const std::string& spec) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParameterError("potential spec '" + spec + "': missing " + key);
    const double v = it->second;
    kv.erase(it);
    return v;
}

}  // namespace detail

// "zero" | "gaussian_well:depth=D,width=W" | "yukawa:strength=S,range=R" | "file:path.chqf"
inline Potential parse_potential(const std::string& spec) {
    if (spec.empty() || spec == "zero") return Potential::zero();
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::string body = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (kind == "file") return Potential::grid_sampled(load_field(body));
    auto kv = detail::parse_kv(body, spec);
    Potential v;
    if (kind == "gaussian_well") {
        const double depth = detail::take(kv, "depth", spec);
        v = Potential::gaussian_well(depth, detail::take(kv, "width", spec));
    } else if (kind == "yukawa") {
        const double strength = detail::take(kv, "strength", spec);
        v = Potential::yukawa(strength, detail::take(kv, "range", spec));
    } else {
        throw ParameterError("unknown potential kind '" + kind + "'");
    }
    if (!kv.empty()) throw ParameterError("potential spec '" + spec + "': unknown key " + kv.begin()->first);
    return v;
}

}  // namespace choquard
