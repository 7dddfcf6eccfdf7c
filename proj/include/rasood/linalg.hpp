#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "rasood/core.hpp"

namespace rasood::linalg {

/// Lower-triangular L with A = L L^T, or nullopt when A is not positive definite.
std::optional<Matrix> cholesky(const Matrix& a);

/// Inverse of a symmetric positive-definite matrix via its Cholesky factor.
/// Throws SingularCovariance when the factorization fails.
Matrix spd_inverse(const Matrix& a);

/// x^T M x for square M.
double quadratic_form(const Matrix& m, std::span<const double> x);

struct Eigensystem {
  std::vector<double> values;  // descending
  Matrix vectors;              // column k pairs with values[k]
  int sweeps = 0;
};

/// Cyclic Jacobi rotations on a symmetric matrix. Stops when the
/// off-diagonal Frobenius norm drops below tol * max(1, ||A||_F).
/// Throws EigenFailure if that does not happen within max_sweeps.
Eigensystem jacobi_eigen(const Matrix& a, double tol = 1e-10, int max_sweeps = 100);

}  // namespace rasood::linalg
