#pragma once

#include <stdexcept>
#include <string>

namespace filab {

/// Malformed or inconsistent inputs (dimension mismatch, invalid distribution).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A computation would exceed a configured work budget.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// NaN or overflow detected during an iterative update.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, long index)
        : std::runtime_error(what + " (at index " + std::to_string(index) + ")"), index_(index) {}

    long index() const noexcept { return index_; }

private:
    long index_;
};

} // namespace filab
