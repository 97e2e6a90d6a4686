#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace deptex {

enum class ErrorCode {
    NotFound,
    WrongKind,
    DuplicateId,
    InvalidField,
    TypeViolation,
    MissingEndpoint,
    DuplicateEdge,
    MalformedDocument,
    MissingField,
    InvariantViolation,
    MalformedRange,
    UnknownEntry,
    SliceMismatch,
    RangeViolation,
    SyntaxError,
    BudgetExceeded,
    HttpDenied,
    HttpFailure,
    RuntimeTypeError,
    MissingVerdict,
    UnknownStatus,
    UnknownChannel,
    UnknownTier,
    CorruptSnapshot,
    Validation,
    StoreUnavailable,
    Unauthorized,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure surfaced by the library carries one of the codes above so the
/// service layer can map it onto an HTTP status without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Position-carrying error raised by the policy front end and interpreter.
class SourceError : public Error {
public:
    SourceError(ErrorCode code, int line, int column, const std::string& message)
        : Error(code, std::to_string(line) + ":" + std::to_string(column) + ": " + message),
          line_(line), column_(column), detail_(message) {}

    [[nodiscard]] int line() const noexcept { return line_; }
    [[nodiscard]] int column() const noexcept { return column_; }
    [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

private:
    int line_;
    int column_;
    std::string detail_;
};

} // namespace deptex
