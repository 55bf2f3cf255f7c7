#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gfts {

enum class ErrorKind {
    // input / validation failures
    ParseError,
    ConfigError,
    IncompleteRectangle,
    DuplicateCell,
    NonPositiveExposure,
    UnknownKey,
    ZeroExposure,
    KeyMismatch,
    ShapeMismatch,
    InvalidInterval,
    InvalidArgument,
    SeriesTooShort,
    SampleTooSmall,
    // numerical failures
    NoConvergence,
    NonConvergence,
    NonInvertible,
    AllCandidatesFailed,
    SingularSystem,
    NonPositiveVariance,
    Unattainable,
};

enum class ErrorCategory { Validation, Numerical };

[[nodiscard]] std::string_view to_string(ErrorKind kind) noexcept;
[[nodiscard]] ErrorCategory category_of(ErrorKind kind) noexcept;

/// Library-wide exception. The kind decides the CLI exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
    [[nodiscard]] ErrorCategory category() const noexcept { return category_of(kind_); }

    /// Same kind, message prefixed with `context: `.
    [[nodiscard]] Error with_context(const std::string& context) const;

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace gfts
