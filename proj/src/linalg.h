#ifndef MORSEM_LINALG_H
#define MORSEM_LINALG_H

#include <cassert>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace morsem {

using Vec = std::vector<double>;

// Row-major dense matrix, sized once and mutated in place.
struct Mat {
  int rows = 0;
  int cols = 0;
  Vec data;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(int r, int c) { return data[r * cols + c]; }
  double operator()(int r, int c) const { return data[r * cols + c]; }

  static Mat Identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline void AxpyInto(Vec* y, double a, const Vec& x) {
  assert(y->size() == x.size());
  for (std::size_t i = 0; i < x.size(); ++i) (*y)[i] += a * x[i];
}

inline double Dot(const Vec& a, const Vec& b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double SquaredDistance(const Vec& a, const Vec& b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double Norm(const Vec& a) { return std::sqrt(Dot(a, a)); }

// y = M x
inline void MatVecInto(const Mat& m, const Vec& x, Vec* y) {
  assert(static_cast<int>(x.size()) == m.cols);
  y->assign(m.rows, 0.0);
  for (int r = 0; r < m.rows; ++r) {
    double s = 0.0;
    const double* row = &m.data[r * m.cols];
    for (int c = 0; c < m.cols; ++c) s += row[c] * x[c];
    (*y)[r] = s;
  }
}

// y = M^T x
inline void MatTransVecInto(const Mat& m, const Vec& x, Vec* y) {
  assert(static_cast<int>(x.size()) == m.rows);
  y->assign(m.cols, 0.0);
  for (int r = 0; r < m.rows; ++r) {
    const double* row = &m.data[r * m.cols];
    for (int c = 0; c < m.cols; ++c) (*y)[c] += row[c] * x[r];
  }
}

// M += a * u v^T
inline void AddOuterInto(Mat* m, double a, const Vec& u, const Vec& v) {
  assert(static_cast<int>(u.size()) == m->rows);
  assert(static_cast<int>(v.size()) == m->cols);
  for (int r = 0; r < m->rows; ++r)
    for (int c = 0; c < m->cols; ++c) (*m)(r, c) += a * u[r] * v[c];
}

// Undefined (nullopt) when either vector has zero norm.
inline std::optional<double> Cosine(const Vec& a, const Vec& b) {
  double na = Norm(a), nb = Norm(b);
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  return Dot(a, b) / (na * nb);
}

}  // namespace morsem

#endif
