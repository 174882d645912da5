#pragma once

#include <stdexcept>
#include <string>

namespace xsdr {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonFiniteInput : Error {
    explicit NonFiniteInput(const std::string& what = "non-finite value in input") : Error(what) {}
};

struct SingularCovariance : Error {
    explicit SingularCovariance(const std::string& what = "sample covariance is numerically singular") : Error(what) {}
};

struct NotSymmetric : Error {
    explicit NotSymmetric(const std::string& what = "matrix is not symmetric") : Error(what) {}
};

struct AllEigenvaluesBelowFloor : Error {
    explicit AllEigenvaluesBelowFloor(const std::string& what = "all eigenvalues below floor") : Error(what) {}
};

struct RankDeficientBasis : Error {
    explicit RankDeficientBasis(const std::string& what = "basis is rank deficient") : Error(what) {}
};

struct TauOutOfRange : Error {
    explicit TauOutOfRange(const std::string& what = "expectile level must lie in (0,1)") : Error(what) {}
};

struct EmptyInput : Error {
    explicit EmptyInput(const std::string& what = "empty input") : Error(what) {}
};

struct DegenerateSample : Error {
    explicit DegenerateSample(const std::string& what = "degenerate sample: all pairwise distances are zero") : Error(what) {}
};

struct SolveFailure : Error {
    explicit SolveFailure(const std::string& what = "linear solve failed") : Error(what) {}
};

struct TooManySlices : Error {
    explicit TooManySlices(const std::string& what = "more slices than observations") : Error(what) {}
};

struct EmptySlice : Error {
    explicit EmptySlice(const std::string& what = "slice with no observations") : Error(what) {}
};

struct InvalidOptions : Error {
    explicit InvalidOptions(const std::string& what = "invalid options") : Error(what) {}
};

}  // namespace xsdr
