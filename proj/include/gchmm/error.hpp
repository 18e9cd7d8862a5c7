#pragma once

#include <cstddef>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gchmm {

// Base for all input/contract violations. The CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Malformed input text. Carries the 1-based line number when known (0 otherwise).
class ParseError : public ValidationError {
  public:
    ParseError(const std::string &what, std::size_t line = 0)
        : ValidationError(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

// Index, shape, or value outside its allowed domain.
class DomainError : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

// Two inputs disagree about the same cell (e.g. duplicated symptom rows).
class ConflictError : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

// Internal state inconsistent with its own invariants (e.g. R defined off a 0->1 cell).
class IntegrityError : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

// Non-finite or overflowing quantities. The CLI maps these to exit code 3.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

using WarningHandler = std::function<void(std::string_view)>;

// Process-wide warning sink. Defaults to stderr; tests and the CLI may replace it.
inline WarningHandler &warning_handler() {
    static WarningHandler handler = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
    return handler;
}

inline void warn(std::string_view msg) {
    if (auto &h = warning_handler())
        h(msg);
}

// Restores the previous warning handler on scope exit.
class ScopedWarningHandler {
  public:
    explicit ScopedWarningHandler(WarningHandler h) : saved_(std::move(warning_handler())) {
        warning_handler() = std::move(h);
    }
    ~ScopedWarningHandler() { warning_handler() = std::move(saved_); }
    ScopedWarningHandler(const ScopedWarningHandler &) = delete;
    ScopedWarningHandler &operator=(const ScopedWarningHandler &) = delete;

  private:
    WarningHandler saved_;
};

} // namespace gchmm
