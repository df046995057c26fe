#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace energia {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Terminal status of an iterative run.
enum class Status { converged, budget_exhausted, infeasible_step, numerical_failure };

const char* to_string(Status s);

// Base error type for contract violations detected by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a point lies on or outside a barrier boundary.
struct BoundaryError : Error {
  double min_u;
  BoundaryError(const std::string& what, double u) : Error(what), min_u(u) {}
};

// Raised when a symmetric factorization fails.
struct FactorizationError : Error {
  using Error::Error;
};

}  // namespace energia
