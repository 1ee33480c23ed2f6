#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace flip {

// CLI-visible error classes. The tool maps each to a distinct exit code.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed file content; carries the byte offset where parsing failed.
struct FormatError : DataError {
    FormatError(const std::string& msg, std::size_t byte_offset)
        : DataError(msg + " (at byte " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}
    std::size_t offset;
};

struct ParamError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// API misuse: step after done, backward without forward, ...
struct StateError : std::logic_error {
    using std::logic_error::logic_error;
};

struct TrainingDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MissingArtifact : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// No flank around the bbox is wide enough to source fill patches.
struct FillSourceUnavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace flip
