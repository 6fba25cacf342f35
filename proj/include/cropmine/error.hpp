#pragma once

#include <stdexcept>
#include <string>

namespace cropmine {

// Error categories map to CLI exit codes: ConfigError -> 1,
// FormatError -> 2, StageError -> 3.

/// Bad user input: invalid flag values, inconsistent configuration.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or inconsistent on-disk data.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A pipeline stage failed on valid-looking input.
struct StageError : std::runtime_error {
    StageError(const std::string& stage, const std::string& msg)
        : std::runtime_error("stage '" + stage + "': " + msg), stage_name(stage) {}
    std::string stage_name;
};

} // namespace cropmine
