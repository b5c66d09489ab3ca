#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace freqflow {

// Bad arguments or violated preconditions (maps to CLI exit code 2).
class invalid_input : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Filesystem-level failure: missing file, unwritable path (exit code 1).
class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed file contents; carries the byte offset of the defect (exit code 1).
class format_error : public std::runtime_error {
public:
    format_error(const std::string& msg, std::uint64_t byte_offset)
        : std::runtime_error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
          offset_(byte_offset) {}

    std::uint64_t byte_offset() const { return offset_; }

private:
    std::uint64_t offset_;
};

// Non-finite values produced during a numeric computation (exit code 3).
class numeric_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace freqflow
