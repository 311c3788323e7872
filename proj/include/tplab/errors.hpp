#pragma once

#include <stdexcept>
#include <string>

namespace tplab {

// Invalid configuration or argument values. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem trouble: missing paths, unwritable dirs. CLI maps this to exit code 1.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file content. Carries line/field context in the message. Exit code 1.
struct ParseError : IoError {
    explicit ParseError(const std::string& msg) : IoError(msg) {}
};

// Non-finite values or failed numeric operations at runtime. Exit code 3.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tplab
