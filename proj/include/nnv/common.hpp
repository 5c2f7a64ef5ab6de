#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace nnv {

enum class ErrorCode {
    Parse,
    UnknownNode,
    Cycle,
    UnboundedInput,
    DuplicateId,
    Arity,
    UnknownVar,
    BatchOrder,
    BoundCross,
    Numeric,
    RootConflict,
    AllAssigned,
    NotInfeasible,
    EmptyInterval,
    Timeout,
    TooLarge,
    MisclassifiedBase,
    GridMismatch,
    InvalidQuery,
    Io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

// Comparison margin for phase decisions, witness checking and tie detection.
inline constexpr double kSafetyMargin = 1e-4;

// Tolerance below which an LP bound or row violation counts as satisfied.
inline constexpr double kFeasTol = 1e-7;

// Pivot elements smaller than this are treated as zero.
inline constexpr double kPivotTol = 1e-9;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

} // namespace nnv
