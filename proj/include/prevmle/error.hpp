#pragma once

#include <stdexcept>
#include <string>

namespace prevmle {

/// Category of a reported failure. Callers branch on this rather than on message text.
enum class Errc {
    empty_input,
    single_class,
    non_finite,
    dimension_mismatch,
    out_of_range,
    zero_mass,
    malformed_input,
    unknown_feature,
    insufficient_records,
    invalid_argument,
    undersized_cell,
    io_error,
};

inline const char* to_string(Errc code) noexcept {
    switch (code) {
    case Errc::empty_input: return "empty_input";
    case Errc::single_class: return "single_class";
    case Errc::non_finite: return "non_finite";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::out_of_range: return "out_of_range";
    case Errc::zero_mass: return "zero_mass";
    case Errc::malformed_input: return "malformed_input";
    case Errc::unknown_feature: return "unknown_feature";
    case Errc::insufficient_records: return "insufficient_records";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::undersized_cell: return "undersized_cell";
    case Errc::io_error: return "io_error";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

namespace detail {

inline void require(bool condition, Errc code, const std::string& what) {
    if (!condition) {
        throw Error(code, what);
    }
}

} // namespace detail
} // namespace prevmle
