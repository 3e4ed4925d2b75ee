#pragma once

#include <stdexcept>
#include <string>

namespace lightloc {

// Failure categories surfaced by the library. CLI exit codes map Usage-family
// codes to 1 and everything else to 2.
enum class ErrorCode {
    DegenerateGeometry,
    NoConsensus,
    LengthMismatch,
    WrongFrame,
    TooFewSamples,
    ShapeMismatch,
    ZeroVector,
    UnknownSample,
    WindowNotFull,
    WrongEpoch,
    InvalidConfig,
    InvalidSpec,
    SingularInnovation,
    MissingArtifact,
    VersionMismatch,
    IoError,
    UsageError,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

// True for errors caused by bad user input rather than runtime failure.
inline bool is_usage_error(ErrorCode code) {
    return code == ErrorCode::InvalidConfig || code == ErrorCode::InvalidSpec ||
           code == ErrorCode::UsageError;
}

}  // namespace lightloc
