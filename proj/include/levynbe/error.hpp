#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace levynbe {

// Root of every error raised by the library. Callers that only want to
// report and exit can catch this one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A documented precondition or invariant was violated by the caller.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

class GammaShapeUnderflow : public Error {
public:
    explicit GammaShapeUnderflow(double shape)
        : Error("gamma shape underflow: shape " + std::to_string(shape) + " below 1e-12"),
          shape_(shape) {}
    double shape() const noexcept { return shape_; }

private:
    double shape_;
};

class InputLengthMismatch : public Error {
public:
    InputLengthMismatch(std::size_t expected, std::size_t got)
        : Error("input length mismatch: expected " + std::to_string(expected) + ", got " +
                std::to_string(got)) {}
};

class OutOfBox : public Error {
public:
    using Error::Error;
};

class ModelMismatch : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
public:
    using Error::Error;
};

class FormatVersionMismatch : public Error {
public:
    FormatVersionMismatch(int expected, int got)
        : Error("artifact format version " + std::to_string(got) + " is not supported (expected " +
                std::to_string(expected) + ")") {}
};

class CorruptArtifact : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t row, std::string column, const std::string& reason)
        : Error("parse error at row " + std::to_string(row) + ", column '" + column + "': " + reason),
          row_(row),
          column_(std::move(column)) {}
    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

class NonMonotoneTimestamps : public Error {
public:
    explicit NonMonotoneTimestamps(std::size_t row)
        : Error("timestamps not strictly increasing at row " + std::to_string(row)), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class NonPositivePrice : public Error {
public:
    explicit NonPositivePrice(std::size_t row)
        : Error("non-positive price at row " + std::to_string(row)), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class EmptyWindow : public Error {
public:
    explicit EmptyWindow(std::size_t window)
        : Error("window " + std::to_string(window) + " has no observed increments"),
          window_(window) {}
    std::size_t window() const noexcept { return window_; }

private:
    std::size_t window_;
};

class ZeroScale : public Error {
public:
    using Error::Error;
};

}  // namespace levynbe
