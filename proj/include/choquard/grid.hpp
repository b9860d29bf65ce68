#pragma once

#include <fftw3.h>

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <memory>
#include <new>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"

namespace choquard {

using cplx = std::complex<double>;

// Allocator handing out fftw_malloc storage so every buffer satisfies the
// SIMD alignment the cached plans were created with.
template <class T>
struct FftwAllocator {
    using value_type = T;
    FftwAllocator() noexcept = default;
    template <class U>
    FftwAllocator(const FftwAllocator<U>&) noexcept {}

    T* allocate(std::size_t count) {
        if (count > std::numeric_limits<std::size_t>::max() / sizeof(T)) throw std::bad_array_new_length();
        void* p = fftw_malloc(count * sizeof(T));
        if (!p) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, std::size_t) noexcept { fftw_free(p); }

    template <class U>
    bool operator==(const FftwAllocator<U>&) const noexcept { return true; }
};

using ComplexVec = std::vector<cplx, FftwAllocator<cplx>>;
using RealVec = std::vector<double, FftwAllocator<double>>;

// Periodic tensor grid on [-L, L)^d with n points per axis.
// Nodes x_j = -L + j h, h = 2L/n; angular wavenumbers k = pi m / L.
struct Grid {
    int d = 3;
    std::size_t n = 128;
    double L = 12.0;

    Grid() = default;
    Grid(int d_, std::size_t n_, double L_) : d(d_), n(n_), L(L_) { validate(); }

    void validate() const {
        if (d < 1 || d > 3) throw ParameterError("grid dimension must be 1, 2 or 3");
        if (n < 8 || (n & (n - 1)) != 0) throw ParameterError("grid n must be a power of two >= 8");
        if (!(L > 0.0) || !std::isfinite(L)) throw ParameterError("grid half-width must be positive");
    }

    double h() const { return 2.0 * L / static_cast<double>(n); }
    double cell() const { return std::pow(h(), d); }
    double dk() const { return std::numbers::pi / L; }
    std::size_t size() const {
        std::size_t s = 1;
        for (int i = 0; i < d; ++i) s *= n;
        return s;
    }
    // Size of the real-to-complex half spectrum (last axis n/2+1).
    std::size_t half_size() const { return size() / n * (n / 2 + 1); }

    double coord(std::size_t j) const { return -L + static_cast<double>(j) * h(); }
    long freq_index(std::size_t m) const {
        return m < n / 2 ? static_cast<long>(m) : static_cast<long>(m) - static_cast<long>(n);
    }
    double wavenumber(std::size_t m) const { return dk() * static_cast<double>(freq_index(m)); }

    bool operator==(const Grid& o) const { return d == o.d && n == o.n && L == o.L; }
    bool operator!=(const Grid& o) const { return !(*this == o); }

    std::string describe() const {
        return "d=" + std::to_string(d) + " n=" + std::to_string(n) + " L=" + std::to_string(L);
    }
};

inline void require_same_grid(const Grid& a, const Grid& b) {
    if (a != b) throw GridMismatch(a.describe() + " vs " + b.describe());
}

// Complex samples on a grid, row-major with the last axis fastest.
struct Field {
    Grid grid;
    ComplexVec values;

    Field() = default;
    explicit Field(const Grid& g) : grid(g), values(g.size(), cplx{0.0, 0.0}) {}
    Field(const Grid& g, ComplexVec v) : grid(g), values(std::move(v)) {
        if (values.size() != grid.size()) throw GridMismatch("values length does not match grid");
    }

    std::size_t size() const { return values.size(); }
    cplx& operator[](std::size_t i) { return values[i]; }
    const cplx& operator[](std::size_t i) const { return values[i]; }
    cplx* data() { return values.data(); }
    const cplx* data() const { return values.data(); }
};

// Visit every node with its coordinate vector (unused axes are zero).
template <class F>
void for_each_node(const Grid& g, F&& fn) {
    const std::size_t n = g.n;
    std::array<double, 3> x{0.0, 0.0, 0.0};
    std::size_t idx = 0;
    const std::size_t n0 = g.d >= 3 ? n : 1;
    const std::size_t n1 = g.d >= 2 ? n : 1;
    for (std::size_t a = 0; a < n0; ++a) {
        if (g.d >= 3) x[g.d - 3] = g.coord(a);
        for (std::size_t b = 0; b < n1; ++b) {
            if (g.d >= 2) x[g.d - 2] = g.coord(b);
            for (std::size_t c = 0; c < n; ++c, ++idx) {
                x[g.d - 1] = g.coord(c);
                fn(idx, x);
            }
        }
    }
}

// Visit every mode of the full spectrum with its wavevector.
template <class F>
void for_each_mode(const Grid& g, F&& fn) {
    const std::size_t n = g.n;
    std::array<double, 3> k{0.0, 0.0, 0.0};
    std::size_t idx = 0;
    const std::size_t n0 = g.d >= 3 ? n : 1;
    const std::size_t n1 = g.d >= 2 ? n : 1;
    for (std::size_t a = 0; a < n0; ++a) {
        if (g.d >= 3) k[g.d - 3] = g.wavenumber(a);
        for (std::size_t b = 0; b < n1; ++b) {
            if (g.d >= 2) k[g.d - 2] = g.wavenumber(b);
            for (std::size_t c = 0; c < n; ++c, ++idx) {
                k[g.d - 1] = g.wavenumber(c);
                fn(idx, k);
            }
        }
    }
}

inline Field field_from(const Grid& g, const auto& fn) {
    Field f(g);
    for_each_node(g, [&](std::size_t i, const std::array<double, 3>& x) { f[i] = fn(x); });
    return f;
}

}  // namespace choquard
