#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace parcon {

enum class ErrorCode {
    EmptyInput,
    DimensionMismatch,
    NonfiniteValue,
    InvalidPartitionCount,
    BoundsDoNotCover,
    EmptyPart,
    IndexOutOfRange,
    NonViableCombiner,
    BinMismatch,
    SingularHessian,
    DegenerateVariance,
    NoViableCandidate,
    InvalidK,
    LabelMissing,
    InsufficientMemory,
    TooLargeForOracle,
    InvariantViolation,
    InvalidSpec,
    IoError,
    ParseError,
    ConfigError,
};

std::string_view to_string(ErrorCode code);

// Every failure in the library surfaces as this exception. The repetition and
// part fields are filled in by the engine when the error happened inside a
// specific (k, l) cell of a run.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }
    std::optional<std::size_t> repetition() const noexcept { return repetition_; }
    std::optional<std::size_t> part() const noexcept { return part_; }

    Error annotated(std::size_t repetition, std::optional<std::size_t> part) const;

private:
    ErrorCode code_;
    std::string detail_;
    std::optional<std::size_t> repetition_;
    std::optional<std::size_t> part_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace parcon
