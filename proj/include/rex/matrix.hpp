#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace rex {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles. Just enough linear algebra for the
/// hand-rolled policy network; nothing here is performance critical at
/// desk scale.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const {
    return data.data() + static_cast<std::size_t>(r) * cols;
  }

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols + c];
  }

  void zero() { std::fill(data.begin(), data.end(), 0.0); }
  std::size_t size() const { return data.size(); }
};

inline double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

/// y += M x
inline void gemv_add(const Matrix& m, const double* x, double* y) {
  for (int r = 0; r < m.rows; ++r) y[r] += dot(m.row(r), x, m.cols);
}

/// y += M^T x  (x has m.rows entries, y has m.cols)
inline void gemv_t_add(const Matrix& m, const double* x, double* y) {
  for (int r = 0; r < m.rows; ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    const double* row = m.row(r);
    for (int c = 0; c < m.cols; ++c) y[c] += xr * row[c];
  }
}

/// M += u v^T
inline void outer_add(Matrix& m, const double* u, const double* v) {
  for (int r = 0; r < m.rows; ++r) {
    const double ur = u[r];
    if (ur == 0.0) continue;
    double* row = m.row(r);
    for (int c = 0; c < m.cols; ++c) row[c] += ur * v[c];
  }
}

inline void axpy(double a, const std::vector<double>& x, std::vector<double>& y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

}  // namespace rex
