/**
 * @file error.hpp
 * @brief Exception hierarchy shared by every gexpect module
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gexpect {

/// Root of all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller violated an operation's precondition (bad sizes, out-of-range index, ...).
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Expression source failed to parse.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t offset, std::vector<std::string> expected = {})
        : Error(format(message, offset, expected)), offset_(offset), expected_(std::move(expected)) {}

    std::size_t offset() const noexcept { return offset_; }
    const std::vector<std::string>& expected() const noexcept { return expected_; }

private:
    static std::string format(const std::string& message, std::size_t offset,
                              const std::vector<std::string>& expected) {
        std::string out = message + " at byte " + std::to_string(offset);
        if (!expected.empty()) {
            out += " (expected one of:";
            for (const auto& e : expected) out += " " + e;
            out += ")";
        }
        return out;
    }

    std::size_t offset_;
    std::vector<std::string> expected_;
};

/// Evaluating a generator or claim produced a non-finite value or divided by zero.
class EvaluationError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed (non-convergence, non-finite intermediate).
class NumericError : public Error {
public:
    using Error::Error;
};

/// The generator breaks its Lipschitz bound or, in strict mode, g(t, y, 0) = 0.
class AssumptionError : public Error {
public:
    using Error::Error;
};

/// Allocation request that cannot be satisfied.
class ResourceError : public Error {
public:
    using Error::Error;
};

/// Experiment config failed validation; `pointer()` is a JSON-pointer path.
class ConfigError : public Error {
public:
    ConfigError(std::string pointer, const std::string& message)
        : Error(pointer + ": " + message), pointer_(std::move(pointer)) {}

    const std::string& pointer() const noexcept { return pointer_; }

private:
    std::string pointer_;
};

} // namespace gexpect
