#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace reward_audit {

enum class ErrorCode {
    kSyntaxError,
    kUnknownFeature,
    kUnknownKey,
    kMissingFeature,
    kDivisionByZero,
    kInvalidClipBounds,
    kMissingPotential,
    kNotEvaluable,
    kMissingScenarioParameter,
    kEditOutOfRange,
    kOrderingViolated,
    kUnknownEntry,
    kInvalidArgument,
};

std::string_view to_string(ErrorCode code);

class AuditError : public std::runtime_error {
  public:
    AuditError(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

struct SourceLoc {
    int line = 0;
    int column = 0;

    bool known() const noexcept { return line > 0; }
};

/// Raised by the document parsers. `location` points into the offending token.
class ParseError : public AuditError {
  public:
    ParseError(ErrorCode code, SourceLoc loc, std::string expected, const std::string& message)
        : AuditError(code, format(loc, message)), loc_(loc), expected_(std::move(expected)) {}

    SourceLoc location() const noexcept { return loc_; }
    int line() const noexcept { return loc_.line; }
    int column() const noexcept { return loc_.column; }
    const std::string& expected() const noexcept { return expected_; }

  private:
    static std::string format(SourceLoc loc, const std::string& message) {
        return std::to_string(loc.line) + ":" + std::to_string(loc.column) + ": " + message;
    }

    SourceLoc loc_;
    std::string expected_;
};

}  // namespace reward_audit
