#pragma once

#include <stdexcept>
#include <string>

namespace motseg {

/// Invalid configuration or command line input. Maps to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or inconsistent input data. Maps to exit code 3.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Unreadable or unwritable files. Maps to exit code 3.
struct IoError : DataError {
    explicit IoError(const std::string& msg) : DataError(msg) {}
};

/// Non-finite values encountered during numeric computation. Maps to exit code 4.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace motseg
