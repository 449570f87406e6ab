#pragma once

#include <stdexcept>
#include <string>

namespace drumrefine {

enum class Errc {
    file_not_found,
    unsupported_format,
    corrupt_header,
    empty_clip,
    unsupported_sample_rate,
    all_curves_at_floor,
    malformed_smf,
    no_notes,
    parse_error,
    missing_model,
    unknown_class_label,
    io_error,
    config_error,
};

// Domain error carrying a stable error code. The CLI maps config_error to
// exit status 2 and every other code to exit status 1.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace drumrefine
