#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "errors.hpp"
#include "grid.hpp"

namespace choquard {

// CHQF layout: "CHQF", u8 version, u8 d, u64 n, f64 L, then n^d pairs of
// little-endian f64 (re, im) in row-major order. An optional trailer
// "CHQM", u64 length, UTF-8 JSON carries provenance; readers of the field skip it.
inline constexpr std::uint8_t chqf_version = 1;

namespace detail {

template <class T>
void put_le(std::ostream& os, T value) {
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    os.write(bytes.data(), bytes.size());
}

template <class T>
T get_le(std::istream& is) {
    std::array<char, sizeof(T)> bytes{};
    if (!is.read(bytes.data(), bytes.size())) throw FormatError(FormatError::Kind::truncated, "truncated field file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
}

}  // namespace detail

inline void write_field(std::ostream& os, const Field& u, const std::string& metadata = {}) {
    os.write("CHQF", 4);
    detail::put_le<std::uint8_t>(os, chqf_version);
    detail::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(u.grid.d));
    detail::put_le<std::uint64_t>(os, u.grid.n);
    detail::put_le<double>(os, u.grid.L);
    for (const auto& v : u.values) {
        detail::put_le<double>(os, v.real());
        detail::put_le<double>(os, v.imag());
    }
    if (!metadata.empty()) {
        os.write("CHQM", 4);
        detail::put_le<std::uint64_t>(os, metadata.size());
        os.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
    }
    if (!os) throw FormatError(FormatError::Kind::io, "failed writing field");
}

inline Field read_field(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4)) throw FormatError(FormatError::Kind::truncated, "truncated field file");
    if (std::memcmp(magic, "CHQF", 4) != 0) throw FormatError(FormatError::Kind::bad_magic, "bad magic");
    const auto version = detail::get_le<std::uint8_t>(is);
    if (version != chqf_version)
        throw FormatError(FormatError::Kind::unsupported_version, "unsupported version " + std::to_string(version));
    const auto d = detail::get_le<std::uint8_t>(is);
    const auto n = detail::get_le<std::uint64_t>(is);
    const auto L = detail::get_le<double>(is);
    Grid g;
    try {
        g = Grid(d, static_cast<std::size_t>(n), L);
    } catch (const ParameterError& e) {
        throw FormatError(FormatError::Kind::truncated, std::string("invalid grid header: ") + e.what());
    }
    Field u(g);
    for (auto& v : u.values) {
        const double re = detail::get_le<double>(is);
        const double im = detail::get_le<double>(is);
        v = cplx(re, im);
    }
    return u;
}

// Provenance trailer of a stream positioned just after the field payload; empty if absent.
inline std::string read_metadata(std::istream& is) {
    char tag[4];
    if (!is.read(tag, 4)) return {};
    if (std::memcmp(tag, "CHQM", 4) != 0) throw FormatError(FormatError::Kind::bad_magic, "bad metadata tag");
    const auto len = detail::get_le<std::uint64_t>(is);
    std::string out(len, '\0');
    if (!is.read(out.data(), static_cast<std::streamsize>(len)))
        throw FormatError(FormatError::Kind::truncated, "truncated metadata");
    return out;
}

inline void save_field(const std::string& path, const Field& u, const std::string& metadata = {}) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError(FormatError::Kind::io, "cannot open " + path + " for writing");
    write_field(os, u, metadata);
}

inline Field load_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError(FormatError::Kind::io, "cannot open " + path);
    return read_field(is);
}

inline std::string load_field_metadata(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError(FormatError::Kind::io, "cannot open " + path);
    read_field(is);
    return read_metadata(is);
}

}  // namespace choquard
