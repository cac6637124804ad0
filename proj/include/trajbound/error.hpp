#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace trajbound {

enum class Errc {
    invalid_argument,
    dimension_mismatch,
    numeric_domain,
    io_error,
    parse_error,
    schema_error,
    config_error,
    diverged,
    incomplete_trajectory,
};

constexpr std::string_view to_string(Errc code) noexcept {
    switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::numeric_domain: return "numeric-domain";
    case Errc::io_error: return "io-error";
    case Errc::parse_error: return "parse-error";
    case Errc::schema_error: return "schema-error";
    case Errc::config_error: return "config-error";
    case Errc::diverged: return "diverged";
    case Errc::incomplete_trajectory: return "incomplete-trajectory";
    }
    return "unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

/// Raised by the optimizer when the iterate blows up; carries the step and the weight norm.
class DivergedError : public Error {
public:
    DivergedError(long step, double weight_norm, const std::string& what)
        : Error(Errc::diverged, what + " (step " + std::to_string(step) + ", |w| = " +
                                    std::to_string(weight_norm) + ")"),
          step_(step), weight_norm_(weight_norm) {}

    long step() const noexcept { return step_; }
    double weight_norm() const noexcept { return weight_norm_; }

private:
    long step_;
    double weight_norm_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, Errc code, const std::string& what) {
    if (!condition) fail(code, what);
}

} // namespace trajbound
