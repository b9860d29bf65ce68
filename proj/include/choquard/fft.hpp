#pragma once

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "grid.hpp"

namespace choquard {

namespace detail {

enum class PlanKind { forward, backward, r2c, c2r };

struct PlanKey {
    std::vector<int> dims;
    PlanKind kind;
    bool operator<(const PlanKey& o) const { return std::tie(dims, kind) < std::tie(o.dims, o.kind); }
};

class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(const std::vector<int>& dims, PlanKind kind) {
        std::lock_guard<std::mutex> lock(mutex_);
        PlanKey key{dims, kind};
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        fftw_plan plan = make(dims, kind);
        if (!plan) throw std::runtime_error("FFTW planning failed");
        plans_.emplace(key, plan);
        return plan;
    }

    void configure(int threads, bool measure) {
        std::lock_guard<std::mutex> lock(mutex_);
        clear_locked();
        if (threads > 1 && !threads_initialized_) {
            fftw_init_threads();
            threads_initialized_ = true;
        }
        if (threads_initialized_) fftw_plan_with_nthreads(threads > 1 ? threads : 1);
        flags_ = measure ? FFTW_MEASURE : FFTW_ESTIMATE;
    }

    ~PlanCache() { clear_locked(); }

private:
    PlanCache() = default;

    void clear_locked() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
        plans_.clear();
    }

    fftw_plan make(const std::vector<int>& dims, PlanKind kind) const {
        std::size_t total = 1;
        for (int v : dims) total *= static_cast<std::size_t>(v);
        const std::size_t half = total / static_cast<std::size_t>(dims.back()) * (dims.back() / 2 + 1);
        const int rank = static_cast<int>(dims.size());
        fftw_plan plan = nullptr;
        if (kind == PlanKind::forward || kind == PlanKind::backward) {
            auto* buf = fftw_alloc_complex(total);
            plan = fftw_plan_dft(rank, dims.data(), buf, buf, kind == PlanKind::forward ? FFTW_FORWARD : FFTW_BACKWARD,
                                 flags_);
            fftw_free(buf);
        } else {
            auto* r = fftw_alloc_real(total);
            auto* c = fftw_alloc_complex(half);
            plan = kind == PlanKind::r2c ? fftw_plan_dft_r2c(rank, dims.data(), r, c, flags_)
                                         : fftw_plan_dft_c2r(rank, dims.data(), c, r, flags_);
            fftw_free(r);
            fftw_free(c);
        }
        return plan;
    }

    std::mutex mutex_;
    std::map<PlanKey, fftw_plan> plans_;
    unsigned flags_ = FFTW_ESTIMATE;
    bool threads_initialized_ = false;
};

inline std::vector<int> dims_of(const Grid& g) { return std::vector<int>(g.d, static_cast<int>(g.n)); }

inline fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace detail

// Thread count for subsequent transforms and the planner rigor. Drops cached plans.
inline void configure_fft(int threads, bool measure = false) {
    detail::PlanCache::instance().configure(threads, measure);
}

// Unnormalized in-place transforms; backward(forward(u)) = N u.
inline void fft_forward(const Grid& g, cplx* data) {
    fftw_plan p = detail::PlanCache::instance().get(detail::dims_of(g), detail::PlanKind::forward);
    fftw_execute_dft(p, detail::as_fftw(data), detail::as_fftw(data));
}

inline void fft_backward(const Grid& g, cplx* data) {
    fftw_plan p = detail::PlanCache::instance().get(detail::dims_of(g), detail::PlanKind::backward);
    fftw_execute_dft(p, detail::as_fftw(data), detail::as_fftw(data));
}

// Real transforms over arbitrary box dimensions. c2r overwrites its input.
inline void fft_r2c(const std::vector<int>& dims, double* in, cplx* out) {
    fftw_plan p = detail::PlanCache::instance().get(dims, detail::PlanKind::r2c);
    fftw_execute_dft_r2c(p, in, detail::as_fftw(out));
}

inline void fft_c2r(const std::vector<int>& dims, cplx* in, double* out) {
    fftw_plan p = detail::PlanCache::instance().get(dims, detail::PlanKind::c2r);
    fftw_execute_dft_c2r(p, detail::as_fftw(in), out);
}

inline ComplexVec spectrum(const Field& u) {
    ComplexVec out(u.values);
    fft_forward(u.grid, out.data());
    return out;
}

// Inverse of spectrum(): applies the 1/N normalization.
inline Field from_spectrum(const Grid& g, ComplexVec spec) {
    fft_backward(g, spec.data());
    const double inv = 1.0 / static_cast<double>(g.size());
    for (auto& v : spec) v *= inv;
    return Field(g, std::move(spec));
}

}  // namespace choquard
