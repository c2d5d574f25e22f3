#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ruleforge {

enum class ErrorKind {
    ParseError,
    RangeError,
    DuplicateAspect,
    MissingSubRule,
    InvalidRubric,
    EmptyInput,
    DegenerateInput,
    NoRelevantItems,
    AllZeroGains,
    InsufficientSamples,
    MalformedResponse,
    OracleUnavailable,
    CorruptStore,
    UnvisitedChild,
    NoUntriedActions,
    BudgetExhaustedWithEmptyTree,
    InvalidRange,
    MissingScores,
    MissingAspects,
    PreconditionViolation,
    EmptyPrediction,
    InvalidParameters,
    InsufficientRules,
    InsufficientGenerations,
    ConfigError,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::RangeError: return "RangeError";
    case ErrorKind::DuplicateAspect: return "DuplicateAspect";
    case ErrorKind::MissingSubRule: return "MissingSubRule";
    case ErrorKind::InvalidRubric: return "InvalidRubric";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::NoRelevantItems: return "NoRelevantItems";
    case ErrorKind::AllZeroGains: return "AllZeroGains";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::MalformedResponse: return "MalformedResponse";
    case ErrorKind::OracleUnavailable: return "OracleUnavailable";
    case ErrorKind::CorruptStore: return "CorruptStore";
    case ErrorKind::UnvisitedChild: return "UnvisitedChild";
    case ErrorKind::NoUntriedActions: return "NoUntriedActions";
    case ErrorKind::BudgetExhaustedWithEmptyTree: return "BudgetExhaustedWithEmptyTree";
    case ErrorKind::InvalidRange: return "InvalidRange";
    case ErrorKind::MissingScores: return "MissingScores";
    case ErrorKind::MissingAspects: return "MissingAspects";
    case ErrorKind::PreconditionViolation: return "PreconditionViolation";
    case ErrorKind::EmptyPrediction: return "EmptyPrediction";
    case ErrorKind::InvalidParameters: return "InvalidParameters";
    case ErrorKind::InsufficientRules: return "InsufficientRules";
    case ErrorKind::InsufficientGenerations: return "InsufficientGenerations";
    case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/// Library-wide exception. `line` is set for errors tied to a position in
/// an input file (1-based).
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, std::optional<std::size_t> line = std::nullopt)
        : std::runtime_error(format(kind, message, line)), kind_(kind), line_(line), detail_(message) {}

    ErrorKind kind() const noexcept { return kind_; }
    std::optional<std::size_t> line() const noexcept { return line_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    static std::string format(ErrorKind kind, const std::string& message, std::optional<std::size_t> line) {
        std::string out(to_string(kind));
        if (line) out += " (line " + std::to_string(*line) + ")";
        if (!message.empty()) out += ": " + message;
        return out;
    }

    ErrorKind kind_;
    std::optional<std::size_t> line_;
    std::string detail_;
};

} // namespace ruleforge
