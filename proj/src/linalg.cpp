#include "rasood/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rasood::linalg {

std::optional<Matrix> cholesky(const Matrix& a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw Error(ErrorCode::DimensionMismatch, "cholesky of a non-square matrix");
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag)) return std::nullopt;
    const double root = std::sqrt(diag);
    l(j, j) = root;
    for (std::size_t i = j + 1; i < n; ++i) {
      double acc = a(i, j);
      for (std::size_t k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
      l(i, j) = acc / root;
    }
  }
  return l;
}

Matrix spd_inverse(const Matrix& a) {
  const auto factor = cholesky(a);
  if (!factor) throw Error(ErrorCode::SingularCovariance, "covariance is not positive definite");
  const Matrix& l = *factor;
  const std::size_t n = a.rows();
  Matrix inv(n, n);
  std::vector<double> col(n);
  for (std::size_t e = 0; e < n; ++e) {
    // forward: L y = e_e
    for (std::size_t i = 0; i < n; ++i) {
      double acc = (i == e) ? 1.0 : 0.0;
      for (std::size_t k = 0; k < i; ++k) acc -= l(i, k) * col[k];
      col[i] = acc / l(i, i);
    }
    // backward: L^T x = y
    for (std::size_t ii = n; ii-- > 0;) {
      double acc = col[ii];
      for (std::size_t k = ii + 1; k < n; ++k) acc -= l(k, ii) * col[k];
      col[ii] = acc / l(ii, ii);
    }
    for (std::size_t i = 0; i < n; ++i) inv(i, e) = col[i];
  }
  // symmetrize away rounding asymmetry
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = avg;
      inv(j, i) = avg;
    }
  return inv;
}

double quadratic_form(const Matrix& m, std::span<const double> x) {
  if (m.rows() != x.size() || m.cols() != x.size()) {
    throw Error(ErrorCode::DimensionMismatch, "quadratic form dimension mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * dot(m.row(i), x);
  return acc;
}

namespace {

double off_diagonal_norm(const Matrix& a) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) acc += a(i, j) * a(i, j);
  return std::sqrt(acc);
}

}  // namespace

Eigensystem jacobi_eigen(const Matrix& input, double tol, int max_sweeps) {
  const std::size_t n = input.rows();
  if (input.cols() != n || n == 0) throw Error(ErrorCode::DimensionMismatch, "jacobi needs a square matrix");
  require_finite(input.values(), "jacobi input");
  Matrix a = input;
  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  double frob = 0.0;
  for (double x : a.values()) frob += x * x;
  const double threshold = tol * std::max(1.0, std::sqrt(frob));

  int sweep = 0;
  while (off_diagonal_norm(a) > threshold) {
    if (sweep >= max_sweeps) {
      throw Error(ErrorCode::EigenFailure, "jacobi did not converge in " + std::to_string(max_sweeps) + " sweeps");
    }
    ++sweep;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return a(l, l) > a(r, r); });
  Eigensystem out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  out.sweeps = sweep;
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

}  // namespace rasood::linalg
