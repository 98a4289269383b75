#pragma once

#include <stdexcept>
#include <string>

namespace causalkit {

// Failure classes surfaced by the library. The CLI maps each class to a
// distinct process exit code, so keep the enumeration stable.
enum class ErrorCode {
    Internal = 1,
    Usage = 2,
    FileNotFound = 3,
    FormatError = 4,
    InconsistentConstraints = 5,
    UnsupportedConstraint = 6,
    MissingApiKey = 7,
    HttpFailure = 8,
    CacheMiss = 9,
    ConfigError = 10,
    CyclicInput = 11,
    EmptyInput = 12,
    IndexMismatch = 13,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

}  // namespace causalkit
