#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "ncq/algebra.hpp"
#include "ncq/error.hpp"

// Dense numerics used by the feasibility solvers: row-major matrices, a
// cyclic Jacobi eigensolver, the Hermitian-to-symmetric embedding, affine
// subspaces of symmetric matrices, and Dykstra alternating projections
// between such a subspace and the PSD cone. Everything here is sized for
// moment matrices (tens to a few hundred rows), not for the Monte Carlo
// sampler, which has its own flat kernels.

namespace ncq {

template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols)
      : rows_(rows), cols_(cols), a_(std::size_t(rows) * cols) {}

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = T(1);
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  T& operator()(int i, int j) { return a_[std::size_t(i) * cols_ + j]; }
  const T& operator()(int i, int j) const {
    return a_[std::size_t(i) * cols_ + j];
  }
  T* row(int i) { return a_.data() + std::size_t(i) * cols_; }
  const T* row(int i) const { return a_.data() + std::size_t(i) * cols_; }
  T* data() { return a_.data(); }
  const T* data() const { return a_.data(); }
  std::size_t size() const { return a_.size(); }

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<T> a_;
};

using RealMatrix = Matrix<double>;
using ComplexMatrix = Matrix<Complex>;

inline double frobenius_inner(const RealMatrix& a, const RealMatrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

inline double frobenius_norm(const RealMatrix& a) {
  return std::sqrt(frobenius_inner(a, a));
}

// c = a * b with the k-loop in the middle so the inner loop streams rows.
inline void matmul_into(RealMatrix& c, const RealMatrix& a,
                        const RealMatrix& b) {
  int n = a.rows(), m = a.cols(), p = b.cols();
  std::fill(c.data(), c.data() + c.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    double* ci = c.row(i);
    const double* ai = a.row(i);
    for (int k = 0; k < m; ++k) {
      double aik = ai[k];
      if (aik == 0.0) continue;
      const double* bk = b.row(k);
      for (int j = 0; j < p; ++j) ci[j] += aik * bk[j];
    }
  }
}

inline RealMatrix matmul(const RealMatrix& a, const RealMatrix& b) {
  RealMatrix c(a.rows(), b.cols());
  matmul_into(c, a, b);
  return c;
}

struct EigenDecomposition {
  std::vector<double> values;  // ascending
  RealMatrix vectors;          // column j pairs with values[j]
};

// Cyclic Jacobi for a real symmetric matrix. Sweeps rotate every upper
// off-diagonal entry toward zero until their total mass drops below
// tol * scale; convergence is quadratic once the matrix is near diagonal.
inline EigenDecomposition jacobi_eigen(RealMatrix a, double tol = 1e-12,
                                       int max_sweeps = 100) {
  int n = a.rows();
  RealMatrix v = RealMatrix::identity(n);
  double scale = std::max(1.0, frobenius_norm(a));
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(2.0 * off) <= tol * scale) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (int k = 0; k < n; ++k) {
          double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  EigenDecomposition d;
  d.values.resize(n);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int x, int y) { return a(x, x) < a(y, y); });
  d.vectors = RealMatrix(n, n);
  for (int j = 0; j < n; ++j) {
    d.values[j] = a(order[j], order[j]);
    for (int i = 0; i < n; ++i) d.vectors(i, j) = v(i, order[j]);
  }
  return d;
}

inline double min_eigenvalue(const RealMatrix& a, double tol = 1e-12) {
  if (a.rows() == 0) return 0.0;
  return jacobi_eigen(a, tol).values.front();
}

// Nearest PSD matrix in Frobenius norm: clamp negative eigenvalues to zero.
inline RealMatrix psd_project(const RealMatrix& a, double* min_eig = nullptr) {
  EigenDecomposition d = jacobi_eigen(a);
  if (min_eig) *min_eig = d.values.empty() ? 0.0 : d.values.front();
  int n = a.rows();
  RealMatrix out(n, n);
  for (int j = 0; j < n; ++j) {
    double lam = d.values[j];
    if (lam <= 0.0) continue;
    for (int i = 0; i < n; ++i) {
      double vij = d.vectors(i, j);
      if (vij == 0.0) continue;
      for (int k = i; k < n; ++k) out(i, k) += lam * vij * d.vectors(k, j);
    }
  }
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < i; ++k) out(i, k) = out(k, i);
  return out;
}

// A Hermitian M = X + iY becomes the symmetric [[X, -Y], [Y, X]]; its
// spectrum is that of M with every eigenvalue doubled, so PSD-ness and
// minimum eigenvalue transfer exactly.
inline RealMatrix embed_hermitian(const ComplexMatrix& m) {
  int n = m.rows();
  RealMatrix r(2 * n, 2 * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double x = m(i, j).real(), y = m(i, j).imag();
      r(i, j) = x;
      r(n + i, n + j) = x;
      r(i, n + j) = -y;
      r(n + i, j) = y;
    }
  return r;
}

inline ComplexMatrix unembed_hermitian(const RealMatrix& r) {
  int n = r.rows() / 2;
  ComplexMatrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double x = 0.5 * (r(i, j) + r(n + i, n + j));
      double y = 0.5 * (r(n + i, j) - r(i, n + j));
      m(i, j) = Complex(x, y);
    }
  return m;
}

// Solution set of A x = b: a particular solution plus a nullspace basis.
struct AffineSolution {
  bool consistent = true;
  std::vector<double> particular;
  std::vector<std::vector<double>> nullspace;  // each entry is one basis vector
};

// Gauss-Jordan with partial pivoting; pivots below pivot_tol (relative to
// the largest entry seen) count as zero, which is what keeps nearly-dependent
// constraint rows from minting spurious free directions.
inline AffineSolution solve_affine(RealMatrix a, std::vector<double> b,
                                   double pivot_tol = 1e-10) {
  int m = a.rows(), n = a.cols();
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    scale = std::max(scale, std::abs(a.data()[i]));
  for (double x : b) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) scale = 1.0;
  double tol = pivot_tol * scale;

  std::vector<int> pivot_col_of_row(m, -1);
  std::vector<int> pivot_row_of_col(n, -1);
  int rank = 0;
  for (int col = 0; col < n && rank < m; ++col) {
    int best = -1;
    double best_abs = tol;
    for (int r = rank; r < m; ++r)
      if (std::abs(a(r, col)) > best_abs) {
        best = r;
        best_abs = std::abs(a(r, col));
      }
    if (best < 0) continue;
    for (int j = 0; j < n; ++j) std::swap(a(rank, j), a(best, j));
    std::swap(b[rank], b[best]);
    double inv = 1.0 / a(rank, col);
    for (int j = 0; j < n; ++j) a(rank, j) *= inv;
    b[rank] *= inv;
    a(rank, col) = 1.0;
    for (int r = 0; r < m; ++r) {
      if (r == rank) continue;
      double f = a(r, col);
      if (f == 0.0) continue;
      for (int j = 0; j < n; ++j) a(r, j) -= f * a(rank, j);
      b[r] -= f * b[rank];
      a(r, col) = 0.0;
    }
    pivot_col_of_row[rank] = col;
    pivot_row_of_col[col] = rank;
    ++rank;
  }

  AffineSolution sol;
  for (int r = rank; r < m; ++r)
    if (std::abs(b[r]) > tol) {
      sol.consistent = false;
      return sol;
    }
  sol.particular.assign(n, 0.0);
  for (int r = 0; r < rank; ++r) sol.particular[pivot_col_of_row[r]] = b[r];
  for (int col = 0; col < n; ++col) {
    if (pivot_row_of_col[col] >= 0) continue;
    std::vector<double> z(n, 0.0);
    z[col] = 1.0;
    for (int r = 0; r < rank; ++r)
      z[pivot_col_of_row[r]] = -a(r, col);
    sol.nullspace.push_back(std::move(z));
  }
  return sol;
}

inline int matrix_rank(RealMatrix a, double pivot_tol = 1e-10) {
  std::vector<double> b(a.rows(), 0.0);
  AffineSolution s = solve_affine(std::move(a), std::move(b), pivot_tol);
  return int(s.particular.size() - s.nullspace.size());
}

// Pseudo-inverse of a symmetric PSD matrix via its eigendecomposition,
// dropping modes below cutoff * largest eigenvalue.
inline RealMatrix pseudo_inverse_spd(const RealMatrix& g,
                                     double cutoff = 1e-12) {
  EigenDecomposition d = jacobi_eigen(g);
  int n = g.rows();
  double lam_max = 0.0;
  for (double l : d.values) lam_max = std::max(lam_max, std::abs(l));
  RealMatrix out(n, n);
  for (int j = 0; j < n; ++j) {
    double lam = d.values[j];
    if (lam <= cutoff * std::max(lam_max, 1e-300)) continue;
    double inv = 1.0 / lam;
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        out(i, k) += inv * d.vectors(i, j) * d.vectors(k, j);
  }
  return out;
}

// Affine subspace of symmetric matrices, S(t) = offset + sum_k t_k basis[k].
// Orthogonal projection onto the subspace goes through the pseudo-inverse of
// the basis Gram matrix, computed once up front.
struct AffineMatrixSet {
  RealMatrix offset;
  std::vector<RealMatrix> basis;
  RealMatrix gram_pinv;

  void finalize() {
    int k = int(basis.size());
    RealMatrix gram(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = i; j < k; ++j)
        gram(i, j) = gram(j, i) = frobenius_inner(basis[i], basis[j]);
    gram_pinv = pseudo_inverse_spd(gram);
  }

  RealMatrix project(const RealMatrix& s,
                     std::vector<double>* coords = nullptr) const {
    int k = int(basis.size());
    std::vector<double> g(k), c(k, 0.0);
    RealMatrix delta = s;
    for (std::size_t i = 0; i < delta.size(); ++i)
      delta.data()[i] -= offset.data()[i];
    for (int i = 0; i < k; ++i) g[i] = frobenius_inner(basis[i], delta);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) c[i] += gram_pinv(i, j) * g[j];
    RealMatrix out = offset;
    for (int i = 0; i < k; ++i) {
      if (c[i] == 0.0) continue;
      for (std::size_t e = 0; e < out.size(); ++e)
        out.data()[e] += c[i] * basis[i].data()[e];
    }
    if (coords) *coords = std::move(c);
    return out;
  }
};

enum class ProjectionStatus { converged, stalled, iteration_limit };

struct DykstraResult {
  ProjectionStatus status = ProjectionStatus::iteration_limit;
  RealMatrix point;            // iterate on the affine set
  std::vector<double> coords;  // its basis coordinates
  double min_eigenvalue = 0.0;
  double residual = 0.0;  // Frobenius gap between cone and affine iterates
  int iterations = 0;
};

// Dykstra alternating projections between the PSD cone and an affine
// subspace. Only the cone step carries a correction term; projection onto an
// affine set needs none for the scheme to converge to the intersection.
// A stall (residual parked above 10 * tol with relative progress under 1e-3
// per window) is reported rather than ground through.
inline DykstraResult dykstra_psd_affine(const AffineMatrixSet& set, double tol,
                                        int max_iter, int stall_window = 500) {
  DykstraResult res;
  int n = set.offset.rows();
  RealMatrix s = set.offset;
  RealMatrix corr(n, n);
  double window_start_residual = -1.0;
  for (int iter = 1; iter <= max_iter; ++iter) {
    RealMatrix shifted = s;
    for (std::size_t i = 0; i < shifted.size(); ++i)
      shifted.data()[i] += corr.data()[i];
    RealMatrix y = psd_project(shifted);
    for (std::size_t i = 0; i < corr.size(); ++i)
      corr.data()[i] = shifted.data()[i] - y.data()[i];
    std::vector<double> coords;
    RealMatrix s_next = set.project(y, &coords);
    double gap = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      double d = y.data()[i] - s_next.data()[i];
      gap += d * d;
    }
    gap = std::sqrt(gap);
    res.iterations = iter;
    res.residual = gap;
    s = std::move(s_next);
    res.coords = std::move(coords);
    if (gap <= tol) {
      res.status = ProjectionStatus::converged;
      break;
    }
    if (iter % stall_window == 0) {
      if (window_start_residual >= 0.0 && gap > 10.0 * tol &&
          gap > (1.0 - 1e-3) * window_start_residual) {
        res.status = ProjectionStatus::stalled;
        break;
      }
      window_start_residual = gap;
    }
  }
  res.point = std::move(s);
  res.min_eigenvalue = min_eigenvalue(res.point);
  return res;
}

}  // namespace ncq
