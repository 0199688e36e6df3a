#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mfnet {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class NotSymmetric : public Error {
public:
    using Error::Error;
};

class NotPsd : public Error {
public:
    using Error::Error;
};

/// Raised when a matrix is too ill-conditioned to invert at the requested
/// relative tolerance (lambda_min < rel_tol * lambda_max).
class InverseUnstable : public Error {
public:
    InverseUnstable(const std::string& what, double lambda_min, double lambda_max)
        : Error(what), lambda_min_(lambda_min), lambda_max_(lambda_max) {}

    double lambda_min() const noexcept { return lambda_min_; }
    double lambda_max() const noexcept { return lambda_max_; }

private:
    double lambda_min_;
    double lambda_max_;
};

class DegenerateFit : public Error {
public:
    using Error::Error;
};

class DegenerateWidth : public Error {
public:
    using Error::Error;
};

class NonFiniteLoss : public Error {
public:
    explicit NonFiniteLoss(std::size_t step)
        : Error("non-finite loss at step " + std::to_string(step)), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class IoError : public Error {
public:
    IoError(const std::string& what, std::string path)
        : Error(what + ": " + path), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

} // namespace mfnet
