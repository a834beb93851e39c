#pragma once

#include <stdexcept>
#include <string>

namespace etp {

// Malformed or missing input data (records, documents, split files).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Failure inside a model backend (NLI or encoder), including contract
// violations such as an invalid probability distribution.
class BackendError : public std::runtime_error {
public:
    explicit BackendError(const std::string& what) : std::runtime_error(what) {}
};

// A backend was asked for an operation it does not support
// (e.g. fine-tuning a read-only oracle).
class CapabilityError : public BackendError {
public:
    explicit CapabilityError(const std::string& what) : BackendError(what) {}
};

// Bad command-line usage or configuration values.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace etp
