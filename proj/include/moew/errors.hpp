#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace moew {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Missing or unexpected column in a CSV file.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// A cell that cannot be parsed. Row numbers are 1-based data rows (header excluded).
class ParseError : public Error {
public:
    ParseError(std::size_t row, std::string column, const std::string& what)
        : Error("row " + std::to_string(row) + ", column '" + column + "': " + what),
          row_(row), column_(std::move(column)) {}

    std::size_t row() const { return row_; }
    const std::string& column() const { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

/// Value outside the domain of a transformation (e.g. log of a non-positive label).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Caller broke a documented precondition (shape mismatch, negative weight, ...).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    explicit DivergenceError(long step)
        : Error("non-finite loss at step " + std::to_string(step)), step_(step) {}
    long step() const { return step_; }

private:
    long step_;
};

class EstimationError : public Error {
public:
    using Error::Error;
};

class MetricError : public Error {
public:
    using Error::Error;
};

/// Factorization failure that jitter escalation could not repair.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// A generated candidate set would exceed its configured cap.
class SizeError : public Error {
public:
    SizeError(std::size_t count, std::size_t cap)
        : Error("candidate set size " + std::to_string(count) + " exceeds cap " +
                std::to_string(cap)),
          count_(count) {}
    std::size_t count() const { return count_; }

private:
    std::size_t count_;
};

/// Invalid experiment configuration. `key()` is a dotted path such as "metric.name".
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& what)
        : Error(key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

/// Every candidate in a batch failed to train.
class RunError : public Error {
public:
    using Error::Error;
};

} // namespace moew
