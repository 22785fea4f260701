#pragma once

#include <stdexcept>
#include <string>

namespace hadm {

/// Root of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed model, scenario, or configuration. Maps to CLI exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A configuration that is well-formed but cannot be solved as asked
/// (e.g. residual stopping with gamma = 1).
class InvalidConfigError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// An action that is not admissible in the state it is applied to.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A value table that lacks an entry a computation needs.
class IncompleteTableError : public Error {
public:
    using Error::Error;
};

/// A stochastic transition met where a deterministic one was required.
class NotDeterministicError : public Error {
public:
    using Error::Error;
};

/// A state or node budget was exceeded. Maps to CLI exit code 3.
class ResourceError : public Error {
public:
    using Error::Error;
};

/// The model and the plant disagree. Maps to CLI exit code 4.
class ModelInconsistencyError : public Error {
public:
    using Error::Error;
};

/// Zero Bayes normalizer: the observation has probability zero under the model.
class ImpossibleObservationError : public ModelInconsistencyError {
public:
    using ModelInconsistencyError::ModelInconsistencyError;
};

}  // namespace hadm
