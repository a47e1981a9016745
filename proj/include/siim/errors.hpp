#pragma once

#include <stdexcept>
#include <string>

namespace siim {

// Malformed or truncated serialized data (model, ensemble, dataset, report).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Well-formed document carrying a schema version this build does not read.
class VersionError : public FormatError {
public:
    using FormatError::FormatError;
};

// Request outside an operation's supported envelope (e.g. grid search on large N).
class UnsupportedError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace siim
