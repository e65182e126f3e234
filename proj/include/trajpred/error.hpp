#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace trajpred {

enum class ErrorCode {
    TrackTooShort,
    InvalidTrack,
    InvalidLogits,
    DegenerateCovariance,
    HorizonMismatch,
    ModelShapeError,
    NumericalDivergence,
    UnsupportedVersion,
    ChecksumError,
    GridBudgetExceeded,
    ParseError,
    EmptyDataset,
    InvalidArgument,
    IoError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library. `code()` identifies the contract that
/// was violated; `what()` carries "<Code>: <detail>".
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail);

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

/// Non-finite loss. `horizon()` is the first forecast horizon (0-based) whose
/// log-density was not finite, or -1 when the failure is not horizon-local.
class NumericalDivergence : public Error {
public:
    NumericalDivergence(long horizon, const std::string& detail);

    long horizon() const noexcept { return horizon_; }

private:
    long horizon_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& detail);

}  // namespace trajpred
