#pragma once
#include <stdexcept>
#include <string>

namespace ssrlab {

// Invalid user-supplied parameter (range, shape, missing field).
class ParameterError : public std::invalid_argument {
public:
    explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

// A numerical procedure failed to produce a trustworthy answer.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// A matrix that must be positive (semi)definite is not.
class DefinitenessError : public NumericError {
public:
    DefinitenessError(const std::string& what, double min_eigenvalue)
        : NumericError(what), min_eigenvalue_(min_eigenvalue) {}
    double min_eigenvalue() const { return min_eigenvalue_; }

private:
    double min_eigenvalue_;
};

// Risk prediction evaluated at or next to the interpolation pole df2 = n.
class PoleError : public NumericError {
public:
    explicit PoleError(const std::string& what) : NumericError(what) {}
};

}  // namespace ssrlab
