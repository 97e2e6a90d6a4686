#include "deptex/error.hpp"

namespace deptex {

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::WrongKind: return "WrongKind";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::InvalidField: return "InvalidField";
    case ErrorCode::TypeViolation: return "TypeViolation";
    case ErrorCode::MissingEndpoint: return "MissingEndpoint";
    case ErrorCode::DuplicateEdge: return "DuplicateEdge";
    case ErrorCode::MalformedDocument: return "MalformedDocument";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::MalformedRange: return "MalformedRange";
    case ErrorCode::UnknownEntry: return "UnknownEntry";
    case ErrorCode::SliceMismatch: return "SliceMismatch";
    case ErrorCode::RangeViolation: return "RangeViolation";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::HttpDenied: return "HttpDenied";
    case ErrorCode::HttpFailure: return "HttpFailure";
    case ErrorCode::RuntimeTypeError: return "RuntimeTypeError";
    case ErrorCode::MissingVerdict: return "MissingVerdict";
    case ErrorCode::UnknownStatus: return "UnknownStatus";
    case ErrorCode::UnknownChannel: return "UnknownChannel";
    case ErrorCode::UnknownTier: return "UnknownTier";
    case ErrorCode::CorruptSnapshot: return "CorruptSnapshot";
    case ErrorCode::Validation: return "Validation";
    case ErrorCode::StoreUnavailable: return "StoreUnavailable";
    case ErrorCode::Unauthorized: return "Unauthorized";
    }
    return "Unknown";
}

} // namespace deptex
