#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace percept {

/// Failure categories. Each maps to a distinct, testable outcome.
enum class Errc {
    file_not_found,
    unsupported_format,
    corrupt_data,
    io_error,
    dimension_mismatch,
    invalid_argument,
    out_of_range,
    too_small,
    degenerate,
    non_finite,
    divergence,
    shape_mismatch,
    stale_tape,
    negative_base,
    wrong_kind,
    config,
};

inline std::string_view to_string(Errc e)
{
    switch (e) {
    case Errc::file_not_found: return "file not found";
    case Errc::unsupported_format: return "unsupported format";
    case Errc::corrupt_data: return "corrupt data";
    case Errc::io_error: return "i/o error";
    case Errc::dimension_mismatch: return "dimension mismatch";
    case Errc::invalid_argument: return "invalid argument";
    case Errc::out_of_range: return "out of range";
    case Errc::too_small: return "too small";
    case Errc::degenerate: return "degenerate";
    case Errc::non_finite: return "non-finite value";
    case Errc::divergence: return "divergence";
    case Errc::shape_mismatch: return "shape mismatch";
    case Errc::stale_tape: return "stale tape";
    case Errc::negative_base: return "negative base with fractional exponent";
    case Errc::wrong_kind: return "wrong kind";
    case Errc::config: return "config error";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what)
{
    if (!cond)
        fail(code, what);
}

} // namespace percept
