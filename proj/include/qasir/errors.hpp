#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace qasir {

// Base of every error the library throws. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Precondition violated by the caller (empty input, bad sizes, out-of-range values).
class InvalidInput : public Error {
public:
    using Error::Error;
};

// Input is well-formed but the math is undefined on it (zero vector, zero norm).
class DegenerateInput : public Error {
public:
    using Error::Error;
};

// Unknown backbone, inconsistent model settings.
class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Malformed QEMB / QCKPT / JSONL payload. `offset` is the byte position where parsing stopped.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

} // namespace qasir
