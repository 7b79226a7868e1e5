#pragma once

#include <stdexcept>
#include <string>

namespace honeymodel {

// Error taxonomy. The CLI maps these onto process exit codes:
// usage/config -> 1, data/format -> 2, violated internal invariants -> 3.

/// Bad argument values (out-of-range fractions, empty datasets, ...).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor/vector dimension mismatches.
class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed files (bad magic, truncation, count mismatches).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem failures: unreadable inputs, unwritable outputs.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inconsistent configuration, e.g. key fingerprint mismatches or
/// key files with unsafe permissions.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Cosine similarity requested against a zero vector.
class UndefinedSimilarityError : public InputError {
public:
    using InputError::InputError;
};

/// A state the library promises never to reach.
class InternalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace honeymodel
