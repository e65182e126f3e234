#include "trajpred/error.hpp"

namespace trajpred {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::TrackTooShort: return "TrackTooShort";
        case ErrorCode::InvalidTrack: return "InvalidTrack";
        case ErrorCode::InvalidLogits: return "InvalidLogits";
        case ErrorCode::DegenerateCovariance: return "DegenerateCovariance";
        case ErrorCode::HorizonMismatch: return "HorizonMismatch";
        case ErrorCode::ModelShapeError: return "ModelShapeError";
        case ErrorCode::NumericalDivergence: return "NumericalDivergence";
        case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
        case ErrorCode::ChecksumError: return "ChecksumError";
        case ErrorCode::GridBudgetExceeded: return "GridBudgetExceeded";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

NumericalDivergence::NumericalDivergence(long horizon, const std::string& detail)
    : Error(ErrorCode::NumericalDivergence, detail), horizon_(horizon) {}

void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

}  // namespace trajpred
