#pragma once

#include <stdexcept>
#include <string>

namespace metrology {

// Error categories map onto CLI exit codes and HTTP statuses.
enum class ErrorKind {
    validation,    // bad input, unknown names, violated preconditions
    computation,   // non-convergence, singular matrices, degenerate data
    not_found,
    conflict,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string code, const std::string& message)
        : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

    ErrorKind kind() const noexcept { return kind_; }
    // Stable machine-readable code, e.g. "duplicate_column".
    const std::string& code() const noexcept { return code_; }

private:
    ErrorKind kind_;
    std::string code_;
};

inline Error validation_error(std::string code, const std::string& message) {
    return Error(ErrorKind::validation, std::move(code), message);
}

inline Error computation_error(std::string code, const std::string& message) {
    return Error(ErrorKind::computation, std::move(code), message);
}

}  // namespace metrology
