#include "parcon/error.hpp"

namespace parcon {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonfiniteValue: return "NonfiniteValue";
    case ErrorCode::InvalidPartitionCount: return "InvalidPartitionCount";
    case ErrorCode::BoundsDoNotCover: return "BoundsDoNotCover";
    case ErrorCode::EmptyPart: return "EmptyPart";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::NonViableCombiner: return "NonViableCombiner";
    case ErrorCode::BinMismatch: return "BinMismatch";
    case ErrorCode::SingularHessian: return "SingularHessian";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::NoViableCandidate: return "NoViableCandidate";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::LabelMissing: return "LabelMissing";
    case ErrorCode::InsufficientMemory: return "InsufficientMemory";
    case ErrorCode::TooLargeForOracle: return "TooLargeForOracle";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

namespace {

std::string compose(ErrorCode code, const std::string& detail, std::optional<std::size_t> rep,
                    std::optional<std::size_t> part) {
    std::string out(to_string(code));
    if (rep) {
        out += " [k=" + std::to_string(*rep);
        if (part) out += ", l=" + std::to_string(*part);
        out += "]";
    }
    out += ": " + detail;
    return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(compose(code, message, std::nullopt, std::nullopt)), code_(code), detail_(message) {}

Error Error::annotated(std::size_t repetition, std::optional<std::size_t> part) const {
    Error e(code_, detail_);
    static_cast<std::runtime_error&>(e) = std::runtime_error(compose(code_, detail_, repetition, part));
    e.repetition_ = repetition;
    e.part_ = part;
    return e;
}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace parcon
