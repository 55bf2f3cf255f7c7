#include "gfts/error.hpp"

namespace gfts {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::ConfigError: return "ConfigError";
        case ErrorKind::IncompleteRectangle: return "IncompleteRectangle";
        case ErrorKind::DuplicateCell: return "DuplicateCell";
        case ErrorKind::NonPositiveExposure: return "NonPositiveExposure";
        case ErrorKind::UnknownKey: return "UnknownKey";
        case ErrorKind::ZeroExposure: return "ZeroExposure";
        case ErrorKind::KeyMismatch: return "KeyMismatch";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::InvalidInterval: return "InvalidInterval";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::SeriesTooShort: return "SeriesTooShort";
        case ErrorKind::SampleTooSmall: return "SampleTooSmall";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::NonConvergence: return "NonConvergence";
        case ErrorKind::NonInvertible: return "NonInvertible";
        case ErrorKind::AllCandidatesFailed: return "AllCandidatesFailed";
        case ErrorKind::SingularSystem: return "SingularSystem";
        case ErrorKind::NonPositiveVariance: return "NonPositiveVariance";
        case ErrorKind::Unattainable: return "Unattainable";
    }
    return "Unknown";
}

ErrorCategory category_of(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::NoConvergence:
        case ErrorKind::NonConvergence:
        case ErrorKind::NonInvertible:
        case ErrorKind::AllCandidatesFailed:
        case ErrorKind::SingularSystem:
        case ErrorKind::NonPositiveVariance:
        case ErrorKind::Unattainable:
            return ErrorCategory::Numerical;
        default:
            return ErrorCategory::Validation;
    }
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

Error Error::with_context(const std::string& context) const {
    std::string msg = what();
    // strip the "<Kind>: " prefix the constructor re-adds
    const auto prefix = std::string(to_string(kind_)) + ": ";
    if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
    return Error(kind_, context + ": " + msg);
}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace gfts
