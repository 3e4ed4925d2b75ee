#include "lightloc/error.hpp"

namespace lightloc {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
        case ErrorCode::NoConsensus: return "NoConsensus";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::WrongFrame: return "WrongFrame";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::UnknownSample: return "UnknownSample";
        case ErrorCode::WindowNotFull: return "WindowNotFull";
        case ErrorCode::WrongEpoch: return "WrongEpoch";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
        case ErrorCode::SingularInnovation: return "SingularInnovation";
        case ErrorCode::MissingArtifact: return "MissingArtifact";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::UsageError: return "UsageError";
    }
    return "UnknownError";
}

}  // namespace lightloc
