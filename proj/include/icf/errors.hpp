#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace icf {

// Malformed input text. Carries the 1-based line number of the offending line.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Well-formed input whose values break a documented range or invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Filesystem failures (missing file, short write).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Corrupted or incompatible binary model file.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller broke a precondition (dimension mismatch, index out of range).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace icf
