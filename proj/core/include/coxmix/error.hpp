#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace coxmix {

// Base for every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data. Carries the 1-based data row when known.
class DataError : public Error {
public:
    explicit DataError(const std::string& what, std::size_t row = 0)
        : Error(what), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

// Model file could not be parsed.
class ModelFormatError : public Error {
public:
    using Error::Error;
};

// Model file parsed but carries an unsupported format version.
class ModelVersionError : public ModelFormatError {
public:
    using ModelFormatError::ModelFormatError;
};

// Optimisation diverged (non-finite loss or gradient).
class TrainingError : public Error {
public:
    using Error::Error;
};

// A metric is undefined on the supplied sample (no comparable pairs, G(t) = 0, ...).
class MetricError : public Error {
public:
    using Error::Error;
};

}  // namespace coxmix
