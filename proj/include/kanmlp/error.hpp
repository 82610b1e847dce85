#pragma once

#include <stdexcept>
#include <string>

namespace kanmlp {

// Root of every error the library throws. The CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

// Bad caller-supplied values: NaN inputs, labels outside {0,1}, invalid configs.
class InputError : public Error {
public:
    using Error::Error;
};

class EvaluationError : public Error {
public:
    EvaluationError(const std::string& what, std::size_t index)
        : Error(what), index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

// Malformed dataset or model files. Carries the byte offset (binary) or line (text) at fault.
class FormatError : public Error {
public:
    using Error::Error;
};

class ArchitectureError : public FormatError {
public:
    using FormatError::FormatError;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class SplitError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

class DivergenceError : public TrainingError {
public:
    using TrainingError::TrainingError;
};

class MetricError : public Error {
public:
    using Error::Error;
};

}  // namespace kanmlp
