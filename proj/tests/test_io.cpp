#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <random>
#include <sstream>

#include <choquard/io.hpp>

using namespace choquard;

namespace {

Field random_field(const Grid& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    Field u(g);
    for (auto& v : u.values) v = cplx(n(rng), n(rng));
    return u;
}

std::string serialize(const Field& u, const std::string& meta = {}) {
    std::ostringstream os(std::ios::binary);
    write_field(os, u, meta);
    return os.str();
}

FormatError::Kind read_error(const std::string& bytes) {
    std::istringstream is(bytes, std::ios::binary);
    try {
        read_field(is);
    } catch (const FormatError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no format error";
    return FormatError::Kind::io;
}

}  // namespace

TEST(Chqf, BitwiseRoundTrip) {
    const Grid g(3, 8, 2.5);
    Field u = random_field(g, 3);
    u[0] = cplx(-0.0, std::numeric_limits<double>::denorm_min());
    u[1] = cplx(std::numeric_limits<double>::max(), -1e-300);
    const auto path = std::filesystem::temp_directory_path() / "choquard_test_roundtrip.chqf";
    save_field(path.string(), u);
    const Field v = load_field(path.string());
    std::filesystem::remove(path);
    EXPECT_EQ(v.grid, g);
    ASSERT_EQ(v.size(), u.size());
    EXPECT_EQ(std::memcmp(u.values.data(), v.values.data(), u.size() * sizeof(cplx)), 0);
}

TEST(Chqf, HeaderLayout) {
    const Grid g(2, 8, 1.0);
    const std::string bytes = serialize(Field(g));
    EXPECT_EQ(bytes.substr(0, 4), "CHQF");
    EXPECT_EQ(static_cast<int>(bytes[4]), 1);
    EXPECT_EQ(static_cast<int>(bytes[5]), 2);
    EXPECT_EQ(bytes.size(), 4u + 1 + 1 + 8 + 8 + 16 * 64);
}

TEST(Chqf, BadMagic) {
    std::string bytes = serialize(Field(Grid(3, 8, 1.0)));
    bytes[0] = 'X';
    EXPECT_EQ(read_error(bytes), FormatError::Kind::bad_magic);
}

TEST(Chqf, UnsupportedVersion) {
    std::string bytes = serialize(Field(Grid(3, 8, 1.0)));
    bytes[4] = 2;
    std::istringstream is(bytes, std::ios::binary);
    try {
        read_field(is);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.kind(), FormatError::Kind::unsupported_version);
        EXPECT_NE(std::string(e.what()).find("unsupported version"), std::string::npos);
    }
}

TEST(Chqf, Truncation) {
    const std::string bytes = serialize(random_field(Grid(3, 8, 1.0), 1));
    for (std::size_t cut : {std::size_t{2}, std::size_t{5}, std::size_t{13}, bytes.size() - 1})
        EXPECT_EQ(read_error(bytes.substr(0, cut)), FormatError::Kind::truncated) << "cut " << cut;
}

TEST(Chqf, MissingFile) {
    try {
        load_field("/nonexistent/dir/field.chqf");
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.kind(), FormatError::Kind::io);
    }
}

TEST(Chqf, MetadataTrailer) {
    const Grid g(3, 8, 1.0);
    const Field u = random_field(g, 5);
    const std::string meta = R"({"experiment":"ground-state","a":1.0})";
    const std::string bytes = serialize(u, meta);
    std::istringstream is(bytes, std::ios::binary);
    const Field v = read_field(is);
    EXPECT_EQ(std::memcmp(u.values.data(), v.values.data(), u.size() * sizeof(cplx)), 0);
    EXPECT_EQ(read_metadata(is), meta);

    std::istringstream plain(serialize(u), std::ios::binary);
    read_field(plain);
    EXPECT_EQ(read_metadata(plain), "");

    const auto path = std::filesystem::temp_directory_path() / "choquard_test_meta.chqf";
    save_field(path.string(), u, meta);
    EXPECT_EQ(load_field_metadata(path.string()), meta);
    EXPECT_EQ(load_field(path.string()).grid, g);
    std::filesystem::remove(path);
}

TEST(Chqf, TruncatedMetadata) {
    const std::string bytes = serialize(Field(Grid(3, 8, 1.0)), "{\"k\":1}");
    std::istringstream is(bytes.substr(0, bytes.size() - 2), std::ios::binary);
    read_field(is);
    EXPECT_THROW(read_metadata(is), FormatError);
}
