#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "ncq/algebra.hpp"
#include "ncq/error.hpp"
#include "ncq/linalg.hpp"
#include "ncq/rng.hpp"
#include "ncq/states.hpp"

// Monte Carlo half of the large-N cross-check: Gaussian self-adjoint
// ensembles, trace moments of J/sqrt(N), and replica-pattern correlators.
// Every prediction column is produced by the symbolic engine (Fock moments of
// Q_a = A_a + A_a'), never by a lookup table, so the sampler and the algebra
// are independent routes to the same numbers. Matrices are stored as separate
// real and imaginary parts so complex products reduce to the flat real kernel
// in linalg.hpp.

namespace ncq {

enum class Ensemble { real_symmetric, complex_hermitian };

inline const char* ensemble_name(Ensemble e) {
  return e == Ensemble::real_symmetric ? "real_symmetric"
                                       : "complex_hermitian";
}

// complex_hermitian is the default: its normalized trace moments are unbiased
// at the orders we test (the real ensemble's tr(M^2)/N sits at 1 + 1/N, which
// a tight acceptance band at N of a few hundred would flag as a failure).
struct EnsembleConfig {
  Ensemble ensemble = Ensemble::complex_hermitian;
  int N = 100;
  int replicas = 1;
  std::vector<Complex> coefficients;  // replica weights c_a for Delta factors
  int trials = 10;
  uint64_t seed = 0;
};

struct MomentEstimate {
  int k = 0;
  double mean = 0.0;
  double stderr_of_mean = 0.0;
  int trials = 0;
  int N = 0;
};

// Self-adjoint matrix split into real and imaginary parts. For the real
// ensemble the imaginary part is allocated but stays zero; the product
// kernels skip zero rows cheaply enough that we keep one code path.
struct SplitMatrix {
  RealMatrix re, im;

  SplitMatrix() = default;
  explicit SplitMatrix(int n) : re(n, n), im(n, n) {}
  int size() const { return re.rows(); }
};

namespace detail {

inline void validate_ensemble(const EnsembleConfig& cfg,
                              bool needs_coefficients) {
  if (cfg.N < 1) throw Error("matrix size N must be positive");
  if (cfg.replicas < 1) throw Error("replica count p must be positive");
  if (cfg.trials < 2) throw Error("at least 2 trials are required");
  if (needs_coefficients || !cfg.coefficients.empty()) {
    if (int(cfg.coefficients.size()) != cfg.replicas)
      throw Error("coefficient vector needs one entry per replica (got " +
                  std::to_string(cfg.coefficients.size()) + " for p = " +
                  std::to_string(cfg.replicas) + ")");
    double s = 0.0;
    for (const Complex& c : cfg.coefficients) s += std::norm(c);
    if (std::abs(s - cfg.replicas) > 1e-9) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.12g", s);
      throw Error("coefficients must satisfy sum |c_a|^2 = p; sum is " +
                  std::string(buf));
    }
  }
}

inline void add_scaled(RealMatrix& a, const RealMatrix& b, double s) {
  double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) pa[i] += s * pb[i];
}

inline void scale_inplace(SplitMatrix& m, double s) {
  for (double* p : {m.re.data(), m.im.data()})
    for (std::size_t i = 0; i < m.re.size(); ++i) p[i] *= s;
}

// out = a * b via four real products; t is caller-provided scratch.
inline void complex_matmul(SplitMatrix& out, const SplitMatrix& a,
                           const SplitMatrix& b, RealMatrix& t) {
  matmul_into(out.re, a.re, b.re);
  matmul_into(t, a.im, b.im);
  add_scaled(out.re, t, -1.0);
  matmul_into(out.im, a.re, b.im);
  matmul_into(t, a.im, b.re);
  add_scaled(out.im, t, 1.0);
}

inline Complex trace(const SplitMatrix& x) {
  Complex s = 0.0;
  for (int i = 0; i < x.size(); ++i) s += Complex(x.re(i, i), x.im(i, i));
  return s;
}

// tr(XY) without forming the product: one strided O(N^2) pass.
inline Complex trace_of_product(const SplitMatrix& x, const SplitMatrix& y) {
  const int n = x.size();
  double re = 0.0, im = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* xr = x.re.row(i);
    const double* xi = x.im.row(i);
    for (int k = 0; k < n; ++k) {
      const double yr = y.re(k, i), yi = y.im(k, i);
      re += xr[k] * yr - xi[k] * yi;
      im += xr[k] * yi + xi[k] * yr;
    }
  }
  return {re, im};
}

// tr(XY) for self-adjoint X and Y collapses to a real Frobenius pairing,
// since Y_ki = conj(Y_ik).
inline double pairing(const SplitMatrix& x, const SplitMatrix& y) {
  return frobenius_inner(x.re, y.re) + frobenius_inner(x.im, y.im);
}

// Scratch for trace_powers: five stored powers of M cover every tr(M^k) up
// to k = 12 as a pairing of two self-adjoint factors.
struct PowerWorkspace {
  SplitMatrix a, b, c, e, f;  // M^2, M^4, M^3, M^6, M^5
  RealMatrix t;

  PowerWorkspace(int n, int k_max) {
    if (k_max >= 3) {
      a = SplitMatrix(n);
      t = RealMatrix(n, n);
    }
    if (k_max >= 5) b = SplitMatrix(n);
    if (k_max >= 7) c = SplitMatrix(n);
    if (k_max >= 9) f = SplitMatrix(n);
    if (k_max >= 10) e = SplitMatrix(n);
  }
};

// out[k-1] = (1/N) tr(M^k) for k = 1..k_max, M self-adjoint.
inline void trace_powers(const SplitMatrix& m, int k_max, PowerWorkspace& w,
                         double* out) {
  const double inv_n = 1.0 / m.size();
  out[0] = trace(m).real() * inv_n;
  if (k_max >= 2) out[1] = pairing(m, m) * inv_n;
  if (k_max >= 3) {
    complex_matmul(w.a, m, m, w.t);
    out[2] = pairing(w.a, m) * inv_n;
  }
  if (k_max >= 4) out[3] = pairing(w.a, w.a) * inv_n;
  if (k_max >= 5) {
    complex_matmul(w.b, w.a, w.a, w.t);
    out[4] = pairing(w.b, m) * inv_n;
  }
  if (k_max >= 6) out[5] = pairing(w.b, w.a) * inv_n;
  if (k_max >= 7) {
    complex_matmul(w.c, w.a, m, w.t);
    out[6] = pairing(w.b, w.c) * inv_n;
  }
  if (k_max >= 8) out[7] = pairing(w.b, w.b) * inv_n;
  if (k_max >= 9) {
    complex_matmul(w.f, w.b, m, w.t);
    out[8] = pairing(w.b, w.f) * inv_n;
  }
  if (k_max >= 10) {
    complex_matmul(w.e, w.b, w.a, w.t);
    out[9] = pairing(w.e, w.b) * inv_n;
  }
  if (k_max >= 11) out[10] = pairing(w.e, w.f) * inv_n;
  if (k_max >= 12) out[11] = pairing(w.e, w.e) * inv_n;
}

inline MomentEstimate summarize(const std::vector<double>& vals, int k, int n) {
  const int t = int(vals.size());
  double mean = 0.0;
  for (double v : vals) mean += v;
  mean /= t;
  double ss = 0.0;
  for (double v : vals) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (t - 1));
  return {k, mean, sd / std::sqrt(double(t)), t, n};
}

}  // namespace detail

// Raw (unscaled) Gaussian self-adjoint matrix. Entry variances:
// real_symmetric has off-diagonal 1 and diagonal 2; complex_hermitian has
// off-diagonal complex variance 1 (real and imaginary parts 1/2 each) and
// real diagonal variance 1. The draw order is fixed (row by row along the
// upper triangle), so a (seed, replica, trial) triple names the matrix.
inline SplitMatrix sample_matrix(const EnsembleConfig& cfg, int replica,
                                 int trial) {
  if (cfg.N < 1) throw Error("matrix size N must be positive");
  if (replica < 0 || trial < 0)
    throw Error("replica and trial indices must be nonnegative");
  const int n = cfg.N;
  SplitMatrix m(n);
  RandomStream rng(cfg.seed, uint32_t(replica), uint32_t(trial));
  if (cfg.ensemble == Ensemble::real_symmetric) {
    const double diag_sd = std::sqrt(2.0);
    for (int i = 0; i < n; ++i) {
      m.re(i, i) = diag_sd * rng.next_gaussian();
      for (int j = i + 1; j < n; ++j) {
        const double x = rng.next_gaussian();
        m.re(i, j) = x;
        m.re(j, i) = x;
      }
    }
  } else {
    const double off_sd = std::sqrt(0.5);
    for (int i = 0; i < n; ++i) {
      m.re(i, i) = rng.next_gaussian();
      for (int j = i + 1; j < n; ++j) {
        const double x = off_sd * rng.next_gaussian();
        const double y = off_sd * rng.next_gaussian();
        m.re(i, j) = x;
        m.re(j, i) = x;
        m.im(i, j) = y;
        m.im(j, i) = -y;
      }
    }
  }
  return m;
}

// Mean and stderr of (1/N) tr((J/sqrt(N))^k) for k = 1..k_max across trials.
inline std::vector<MomentEstimate> estimate_trace_moments(
    const EnsembleConfig& cfg, int k_max) {
  if (k_max < 1) throw Error("k_max must be positive");
  if (k_max > 12) throw Error("k_max is capped at 12");
  detail::validate_ensemble(cfg, false);

  std::vector<std::vector<double>> vals(k_max);
  for (auto& v : vals) v.reserve(cfg.trials);
  detail::PowerWorkspace w(cfg.N, k_max);
  const double inv_sqrt_n = 1.0 / std::sqrt(double(cfg.N));
  std::vector<double> out(k_max);
  for (int t = 0; t < cfg.trials; ++t) {
    SplitMatrix m = sample_matrix(cfg, 0, t);
    detail::scale_inplace(m, inv_sqrt_n);
    detail::trace_powers(m, k_max, w, out.data());
    for (int k = 0; k < k_max; ++k) vals[k].push_back(out[k]);
  }

  std::vector<MomentEstimate> result;
  result.reserve(k_max);
  for (int k = 0; k < k_max; ++k)
    result.push_back(detail::summarize(vals[k], k + 1, cfg.N));
  return result;
}

// Pattern entry standing for the mixture (1/sqrt(p)) sum_a c_a M_a rather
// than a single replica.
constexpr int kDeltaLabel = -1;

struct ReplicaResult {
  MomentEstimate estimate;  // statistics of Re[(1/N) tr(product)]
  Complex prediction;       // Fock moment of the matching word in the Q_a
  double abs_error = 0.0;   // |complex sample mean - prediction|
  double sigma_distance = 0.0;  // abs_error in stderr units
  double mean_imag = 0.0;       // imaginary part of the sample mean
};

// The symbolic counterpart of a pattern: the product over pattern entries of
// Q_a = A_a + A_a' (or the c-weighted mixture for Delta) in the p-mode
// quantum Boltzmann algebra.
inline Polynomial replica_pattern_word(int replicas,
                                       const std::vector<Complex>& c,
                                       const std::vector<int>& pattern) {
  auto pres = Presentation::boltzmann(replicas);
  auto q = [&](int a) {
    return Polynomial::generator(pres, a) +
           Polynomial::generator(pres, replicas + a);
  };
  Polynomial prod = Polynomial::scalar(pres, 1.0);
  const Complex inv_sqrt_p(1.0 / std::sqrt(double(replicas)), 0.0);
  for (int item : pattern) {
    if (item == kDeltaLabel) {
      Polynomial d = Polynomial::zero(pres);
      for (int a = 0; a < replicas; ++a) d += c[a] * q(a);
      prod *= d * inv_sqrt_p;
    } else {
      prod *= q(item);
    }
  }
  return prod;
}

// Monte Carlo estimate of (1/N) tr of the pattern product of scaled replica
// matrices M_a = J^(a)/sqrt(N), against the exact Fock prediction.
inline ReplicaResult replica_moment_experiment(const EnsembleConfig& cfg,
                                               const std::vector<int>& pattern) {
  if (pattern.empty()) throw Error("pattern must not be empty");
  if (pattern.size() > 8) throw Error("pattern length is capped at 8");
  bool uses_delta = false;
  for (int item : pattern) {
    if (item == kDeltaLabel) {
      uses_delta = true;
    } else if (item < 0 || item >= cfg.replicas) {
      throw Error("replica label " + std::to_string(item) +
                  " is out of range for p = " + std::to_string(cfg.replicas));
    }
  }
  detail::validate_ensemble(cfg, uses_delta);

  const int n = cfg.N;
  const int m = int(pattern.size());
  const double inv_sqrt_n = 1.0 / std::sqrt(double(n));
  const double inv_sqrt_p = 1.0 / std::sqrt(double(cfg.replicas));

  std::vector<SplitMatrix> mats(cfg.replicas);
  SplitMatrix delta, prod, next;
  RealMatrix t;
  if (uses_delta) delta = SplitMatrix(n);
  if (m > 2) {
    prod = SplitMatrix(n);
    next = SplitMatrix(n);
    t = RealMatrix(n, n);
  }

  std::vector<double> re_vals, im_vals;
  re_vals.reserve(cfg.trials);
  im_vals.reserve(cfg.trials);
  for (int trial = 0; trial < cfg.trials; ++trial) {
    for (int a = 0; a < cfg.replicas; ++a) {
      mats[a] = sample_matrix(cfg, a, trial);
      detail::scale_inplace(mats[a], inv_sqrt_n);
    }
    if (uses_delta) {
      std::fill(delta.re.data(), delta.re.data() + delta.re.size(), 0.0);
      std::fill(delta.im.data(), delta.im.data() + delta.im.size(), 0.0);
      for (int a = 0; a < cfg.replicas; ++a) {
        const Complex w = cfg.coefficients[a] * inv_sqrt_p;
        detail::add_scaled(delta.re, mats[a].re, w.real());
        detail::add_scaled(delta.re, mats[a].im, -w.imag());
        detail::add_scaled(delta.im, mats[a].im, w.real());
        detail::add_scaled(delta.im, mats[a].re, w.imag());
      }
    }
    auto factor = [&](int i) -> const SplitMatrix& {
      return pattern[i] == kDeltaLabel ? delta : mats[pattern[i]];
    };
    Complex value;
    if (m == 1) {
      value = detail::trace(factor(0));
    } else if (m == 2) {
      value = detail::trace_of_product(factor(0), factor(1));
    } else {
      detail::complex_matmul(prod, factor(0), factor(1), t);
      for (int i = 2; i + 1 < m; ++i) {
        detail::complex_matmul(next, prod, factor(i), t);
        std::swap(prod, next);
      }
      value = detail::trace_of_product(prod, factor(m - 1));
    }
    value /= double(n);
    re_vals.push_back(value.real());
    im_vals.push_back(value.imag());
  }

  ReplicaResult r;
  r.estimate = detail::summarize(re_vals, m, n);
  double imag_mean = 0.0;
  for (double v : im_vals) imag_mean += v;
  r.mean_imag = imag_mean / cfg.trials;
  r.prediction =
      fock_evaluate(replica_pattern_word(cfg.replicas, cfg.coefficients,
                                         pattern));
  r.abs_error = std::abs(Complex(r.estimate.mean, r.mean_imag) - r.prediction);
  r.sigma_distance = r.estimate.stderr_of_mean > 0.0
                         ? r.abs_error / r.estimate.stderr_of_mean
                         : (r.abs_error == 0.0 ? 0.0 : HUGE_VAL);
  return r;
}

// Trace-moment estimates across a list of sizes, one CSV row per (N, k). The
// prediction column is the Fock moment of (A + A')^k, evaluated symbolically
// per call. Output is byte-deterministic for a fixed argument list.
inline std::string convergence_sweep(const std::vector<int>& Ns, int k_max,
                                     int trials, uint64_t seed,
                                     Ensemble ensemble =
                                         Ensemble::complex_hermitian) {
  if (k_max < 1) throw Error("k_max must be positive");
  if (k_max > 12) throw Error("k_max is capped at 12");
  for (std::size_t i = 1; i < Ns.size(); ++i)
    if (Ns[i] <= Ns[i - 1])
      throw Error("matrix sizes must be strictly increasing");

  auto pres = Presentation::boltzmann(1);
  const Polynomial q =
      Polynomial::generator(pres, 0) + Polynomial::generator(pres, 1);
  std::vector<double> prediction(k_max);
  for (int k = 1; k <= k_max; ++k)
    prediction[k - 1] = fock_evaluate(q.pow(k)).real();

  std::string csv = "N,k,mean,stderr,prediction,abs_error\n";
  char line[160];
  for (int n : Ns) {
    EnsembleConfig cfg;
    cfg.ensemble = ensemble;
    cfg.N = n;
    cfg.trials = trials;
    cfg.seed = seed;
    for (const MomentEstimate& e : estimate_trace_moments(cfg, k_max)) {
      std::snprintf(line, sizeof line, "%d,%d,%.12g,%.12g,%.12g,%.12g\n", n,
                    e.k, e.mean, e.stderr_of_mean, prediction[e.k - 1],
                    std::abs(e.mean - prediction[e.k - 1]));
      csv += line;
    }
  }
  return csv;
}

}  // namespace ncq
