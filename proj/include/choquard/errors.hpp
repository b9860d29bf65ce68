#pragma once

#include <stdexcept>
#include <string>

namespace choquard {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Inputs outside the admissible parameter window.
class ParameterError : public Error {
public:
    using Error::Error;
};

class GridMismatch : public Error {
public:
    GridMismatch() : Error("grid mismatch") {}
    explicit GridMismatch(const std::string& what) : Error("grid mismatch: " + what) {}
};

class FormatError : public Error {
public:
    enum class Kind { bad_magic, unsupported_version, truncated, io };
    FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

}  // namespace choquard
