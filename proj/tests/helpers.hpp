#pragma once

// Shared test utilities. The raw kron / random generators here are kept
// independent of the library's tensor machinery so that oracle values
// computed with them cross-check the implementation path.

#include <cstdint>
#include <random>

#include "qdefrag/core.hpp"

namespace qdefrag::testing {

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Vector kron_vec(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a[i] * b;
  return out;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : rng_(seed) {}

  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  double gaussian() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  Complex cgaussian() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return {r * std::cos(6.283185307179586 * u2), r * std::sin(6.283185307179586 * u2)};
  }

  Matrix cmatrix(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = cgaussian();
    return m;
  }

  Vector cvector(Index dim) {
    Vector v(dim);
    for (Index i = 0; i < dim; ++i) v[i] = cgaussian();
    return v;
  }

  Vector unit_cvector(Index dim) {
    Vector v = cvector(dim);
    return v / v.norm();
  }

  Matrix unitary(Index dim) {
    Eigen::HouseholderQR<Matrix> qr(cmatrix(dim, dim));
    return Matrix(qr.householderQ());
  }

  Matrix isometry(Index rows, Index cols) {
    Eigen::HouseholderQR<Matrix> qr(cmatrix(rows, cols));
    return Matrix(qr.householderQ()) * Matrix::Identity(rows, cols);
  }

 private:
  std::mt19937_64 rng_;
};

inline Matrix hermitian_random(Index dim, std::uint64_t seed) {
  Rng rng(seed);
  Matrix a = rng.cmatrix(dim, dim);
  return 0.5 * (a + a.adjoint().eval());
}

}  // namespace qdefrag::testing
