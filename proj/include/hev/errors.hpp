#pragma once

#include <stdexcept>
#include <string>

namespace hev {

// Argument outside the mathematical domain of an operation (non-positive
// gamma argument, boundary simplex point, invalid natural parameter, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Dempster combination whose conflict mass reaches 1.
class TotalConflict : public std::runtime_error {
public:
    explicit TotalConflict(double conflict)
        : std::runtime_error("total conflict in evidence combination (C = " + std::to_string(conflict) + ")"),
          conflict_(conflict) {}
    double conflict() const noexcept { return conflict_; }

private:
    double conflict_;
};

// Shape or bookkeeping mismatch between inputs (view counts, lengths, labels).
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Invalid experiment configuration; the message carries the dotted key path.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& what)
        : std::runtime_error(key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

// Non-finite value produced during training or evaluation.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hev
