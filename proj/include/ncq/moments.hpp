#pragma once

#include <cstdlib>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ncq/algebra.hpp"
#include "ncq/linalg.hpp"

// Truncated moment-matrix feasibility: does a positive normalized state with
// the given pinned moments exist on the algebra, as far as degree-d words can
// tell? The matrix indexed by canonical words w, v with entries psi(nf(w* v))
// must be PSD for any state, so pins that admit no PSD completion refute the
// state at this truncation. Feasibility is decided by alternating projections
// between the PSD cone and the affine set of matrices consistent with the
// pins and with Hermiticity of the state.

namespace ncq {

inline int basis_word_cap() {
  if (const char* env = std::getenv("NCQ_MAX_BASIS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 2000;
}

// All rewriting-irreducible words of length <= d in degree-lexicographic
// order. Rules have two-letter left sides, so irreducibility is a local
// property of adjacent pairs and the enumeration can extend words letter by
// letter.
inline std::vector<Word> enumerate_basis_words(const PresentationPtr& pres,
                                               int d, int cap = 0) {
  if (d < 1) throw Error("basis degree must be at least 1");
  if (cap <= 0) cap = basis_word_cap();
  std::vector<Word> out{Word{}};
  std::size_t layer_begin = 0;
  for (int len = 1; len <= d; ++len) {
    std::size_t layer_end = out.size();
    for (std::size_t i = layer_begin; i < layer_end; ++i) {
      for (int g = 0; g < pres->size(); ++g) {
        if (!out[i].empty() && pres->rule_at(out[i].back(), g) >= 0) continue;
        if (int(out.size()) >= cap)
          throw Error("basis size exceeds the cap of " + std::to_string(cap) +
                      " words (see NCQ_MAX_BASIS)");
        Word w = out[i];
        w.push_back(g);
        out.push_back(std::move(w));
      }
    }
    layer_begin = layer_end;
  }
  return out;
}

// constant + sum over canonical words of coeff * psi(word)
struct AffineExpr {
  Complex constant;
  TermMap terms;
};

struct MomentMatrix {
  PresentationPtr pres;
  int degree = 0;
  std::vector<Word> basis;
  std::vector<AffineExpr> entries;  // row-major, basis.size() squared
  TermMap fixed;                    // already substituted into the entries
  std::vector<AffineExpr> extra_constraints;  // each must evaluate to zero

  AffineExpr& at(int i, int j) { return entries[i * basis.size() + j]; }
  const AffineExpr& at(int i, int j) const {
    return entries[i * basis.size() + j];
  }
};

struct SolveOptions {
  double tol = 1e-9;
  int max_iter = 20000;
  int stall_window = 500;
};

struct FeasibilityVerdict {
  enum class Outcome {
    feasible,
    infeasible_certified,
    numerically_infeasible,
    undecided
  };
  Outcome outcome = Outcome::undecided;
  TermMap assignment;  // witness moments, pins included (feasible only)
  double min_eigenvalue = 0.0;
  std::string reason;  // certificate text (infeasible_certified only)
  double residual = 0.0;
  int iterations = 0;

  bool feasible() const { return outcome == Outcome::feasible; }
  const char* outcome_name() const {
    switch (outcome) {
      case Outcome::feasible: return "Feasible";
      case Outcome::infeasible_certified: return "InfeasibleCertified";
      case Outcome::numerically_infeasible: return "NumericallyInfeasible";
      case Outcome::undecided: return "Undecided";
    }
    return "?";
  }
};

namespace detail {

inline AffineExpr expr_from_polynomial(const Polynomial& nf,
                                       const TermMap& fixed) {
  AffineExpr e;
  for (const auto& [w, c] : nf.terms()) {
    auto it = fixed.find(w);
    if (it != fixed.end())
      e.constant += c * it->second;
    else
      e.terms[w] += c;
  }
  return e;
}

}  // namespace detail

inline MomentMatrix build_moment_matrix(
    const PresentationPtr& pres, int d,
    const std::vector<std::pair<Word, Complex>>& fixed) {
  MomentMatrix m;
  m.pres = pres;
  m.degree = d;
  m.fixed[Word{}] = Complex(1.0);
  for (const auto& [w, v] : fixed) {
    if (int(w.size()) > 2 * d)
      throw Error("fixed word '" + pres->display(w) +
                  "' exceeds degree " + std::to_string(2 * d));
    Polynomial canon = normal_form(Polynomial::monomial(pres, w));
    if (canon.terms().size() != 1 || canon.terms().begin()->first != w ||
        std::abs(canon.terms().begin()->second - Complex(1.0)) > 1e-12)
      throw Error("fixed word '" + pres->display(w) + "' is not canonical");
    if (w.empty() && std::abs(v - Complex(1.0)) > 1e-12)
      throw Error("the empty word is fixed to 1 by normalization");
    auto [it, inserted] = m.fixed.try_emplace(w, v);
    if (!inserted && std::abs(it->second - v) > 1e-9)
      throw Error("word '" + pres->display(w) + "' is fixed twice");
  }
  // Hermitian consistency among the pins themselves: psi(w*) = conj(psi(w))
  // whenever both sides are pinned single words.
  for (const auto& [w, v] : m.fixed) {
    Polynomial adj = normal_form(adjoint(Polynomial::monomial(pres, w)));
    if (adj.terms().size() != 1) continue;
    const auto& [aw, ac] = *adj.terms().begin();
    if (std::abs(ac - Complex(1.0)) > 1e-12) continue;
    auto it = m.fixed.find(aw);
    if (it != m.fixed.end() && std::abs(it->second - std::conj(v)) > 1e-9)
      throw Error("fixed values for '" + pres->display(w) + "' and '" +
                  pres->display(aw) + "' are not Hermitian-consistent");
  }

  m.basis = enumerate_basis_words(pres, d);
  int n = int(m.basis.size());
  m.entries.resize(std::size_t(n) * n);
  for (int i = 0; i < n; ++i) {
    Polynomial wi = adjoint(Polynomial::monomial(pres, m.basis[i]));
    for (int j = 0; j < n; ++j) {
      Polynomial prod = normal_form(wi * Polynomial::monomial(pres, m.basis[j]));
      m.at(i, j) = detail::expr_from_polynomial(prod, m.fixed);
    }
  }
  return m;
}

namespace detail {

// Index the free moment variables: every word referenced by the matrix, plus
// whatever their adjoint normal forms drag in, so Hermiticity constraints
// close over the variable set.
struct VariableIndex {
  std::map<Word, int, WordOrder> index;
  std::vector<Word> words;

  int add(const Word& w) {
    auto [it, inserted] = index.try_emplace(w, int(words.size()));
    if (inserted) words.push_back(w);
    return it->second;
  }
};

struct RealRow {
  std::vector<double> a;
  double rhs = 0.0;
};

// Append the two real rows of the complex equation
//   sum coeff_v psi(v) + conj_coeff * conj(psi(w_conj)) + constant = 0
// over variables laid out as (Re psi, Im psi) pairs.
inline void append_complex_equation(std::vector<RealRow>& rows, int n_vars,
                                    const std::vector<std::pair<int, Complex>>&
                                        lin,
                                    int conj_var, Complex conj_coeff,
                                    Complex constant) {
  RealRow re, im;
  re.a.assign(2 * n_vars, 0.0);
  im.a.assign(2 * n_vars, 0.0);
  for (const auto& [v, c] : lin) {
    re.a[2 * v] += c.real();
    re.a[2 * v + 1] -= c.imag();
    im.a[2 * v] += c.imag();
    im.a[2 * v + 1] += c.real();
  }
  if (conj_var >= 0) {
    re.a[2 * conj_var] += conj_coeff.real();
    re.a[2 * conj_var + 1] += conj_coeff.imag();
    im.a[2 * conj_var] += conj_coeff.imag();
    im.a[2 * conj_var + 1] -= conj_coeff.real();
  }
  re.rhs = -constant.real();
  im.rhs = -constant.imag();
  rows.push_back(std::move(re));
  rows.push_back(std::move(im));
}

inline FeasibilityVerdict map_projection_result(const DykstraResult& r) {
  FeasibilityVerdict v;
  v.residual = r.residual;
  v.iterations = r.iterations;
  v.min_eigenvalue = r.min_eigenvalue;
  switch (r.status) {
    case ProjectionStatus::converged:
      v.outcome = FeasibilityVerdict::Outcome::feasible;
      break;
    case ProjectionStatus::stalled:
      v.outcome = FeasibilityVerdict::Outcome::numerically_infeasible;
      break;
    case ProjectionStatus::iteration_limit:
      v.outcome = FeasibilityVerdict::Outcome::undecided;
      break;
  }
  return v;
}

inline std::optional<std::pair<int, double>> forced_negative_diagonal(
    const AffineMatrixSet& set, double tol) {
  int n = set.offset.rows();
  for (int i = 0; i < n; ++i) {
    double dep = 0.0;
    for (const RealMatrix& b : set.basis)
      dep = std::max(dep, std::abs(b(i, i)));
    if (dep <= 1e-12 && set.offset(i, i) < -tol)
      return std::make_pair(i, set.offset(i, i));
  }
  return std::nullopt;
}

inline void symmetrize(RealMatrix& a) {
  for (int i = 0; i < a.rows(); ++i)
    for (int j = i + 1; j < a.cols(); ++j) {
      double v = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = a(j, i) = v;
    }
}

}  // namespace detail

inline FeasibilityVerdict feasibility_solve(const MomentMatrix& m,
                                            const SolveOptions& opt = {}) {
  using detail::VariableIndex;
  int n = int(m.basis.size());

  VariableIndex vars;
  for (const AffineExpr& e : m.entries)
    for (const auto& [w, c] : e.terms) vars.add(w);
  for (const AffineExpr& e : m.extra_constraints)
    for (const auto& [w, c] : e.terms) vars.add(w);
  // close over adjoint normal forms (they feed the Hermiticity rows); the
  // loop bound is re-read on purpose, words added here get processed too
  std::vector<Polynomial> adjoint_nf;
  for (std::size_t i = 0; i < vars.words.size(); ++i) {
    Polynomial adj = normal_form(
        adjoint(Polynomial::monomial(m.pres, vars.words[i])));
    for (const auto& [w, c] : adj.terms())
      if (!m.fixed.count(w)) vars.add(w);
    adjoint_nf.push_back(std::move(adj));
  }

  int n_vars = int(vars.words.size());
  std::vector<detail::RealRow> rows;
  // Hermiticity: psi(nf(w*)) = conj(psi(w)) for every variable word
  for (int i = 0; i < n_vars; ++i) {
    std::vector<std::pair<int, Complex>> lin;
    Complex constant = 0.0;
    for (const auto& [w, c] : adjoint_nf[i].terms()) {
      auto it = m.fixed.find(w);
      if (it != m.fixed.end())
        constant += c * it->second;
      else
        lin.emplace_back(vars.index.at(w), c);
    }
    detail::append_complex_equation(rows, n_vars, lin, i, Complex(-1.0),
                                    constant);
  }
  for (const AffineExpr& e : m.extra_constraints) {
    std::vector<std::pair<int, Complex>> lin;
    for (const auto& [w, c] : e.terms) lin.emplace_back(vars.index.at(w), c);
    detail::append_complex_equation(rows, n_vars, lin, -1, Complex(0.0),
                                    e.constant);
  }

  RealMatrix a(int(rows.size()), 2 * n_vars);
  std::vector<double> b(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int c = 0; c < 2 * n_vars; ++c) a(int(r), c) = rows[r].a[c];
    b[r] = rows[r].rhs;
  }
  AffineSolution sol = solve_affine(std::move(a), std::move(b));
  if (!sol.consistent) {
    FeasibilityVerdict v;
    v.outcome = FeasibilityVerdict::Outcome::infeasible_certified;
    v.reason =
        "the pinned moments admit no Hermitian-consistent assignment";
    return v;
  }

  auto complex_matrix_at = [&](const std::vector<double>& x,
                               bool with_constant) {
    ComplexMatrix cm(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const AffineExpr& e = m.at(i, j);
        Complex val = with_constant ? e.constant : Complex(0.0);
        for (const auto& [w, c] : e.terms) {
          int v = vars.index.at(w);
          val += c * Complex(x[2 * v], x[2 * v + 1]);
        }
        cm(i, j) = val;
      }
    return cm;
  };

  auto assignment_at = [&](const std::vector<double>& t) {
    TermMap out = m.fixed;
    for (int v = 0; v < n_vars; ++v) {
      double re = sol.particular[2 * v], im = sol.particular[2 * v + 1];
      for (std::size_t k = 0; k < sol.nullspace.size(); ++k) {
        re += t[k] * sol.nullspace[k][2 * v];
        im += t[k] * sol.nullspace[k][2 * v + 1];
      }
      out[vars.words[v]] = Complex(re, im);
    }
    return out;
  };

  AffineMatrixSet set;
  set.offset = embed_hermitian(complex_matrix_at(sol.particular, true));
  detail::symmetrize(set.offset);

  // The particular solution is itself a pin-consistent assignment; if its
  // matrix is already PSD there is nothing left to search for.
  double e0_min = min_eigenvalue(set.offset);
  if (e0_min >= -opt.tol) {
    FeasibilityVerdict v;
    v.outcome = FeasibilityVerdict::Outcome::feasible;
    v.min_eigenvalue = e0_min;
    v.assignment = assignment_at(std::vector<double>(sol.nullspace.size()));
    return v;
  }

  for (const std::vector<double>& z : sol.nullspace) {
    RealMatrix e = embed_hermitian(complex_matrix_at(z, false));
    detail::symmetrize(e);
    set.basis.push_back(std::move(e));
  }

  if (auto forced = detail::forced_negative_diagonal(set, opt.tol)) {
    FeasibilityVerdict v;
    v.outcome = FeasibilityVerdict::Outcome::infeasible_certified;
    const Word& w = m.basis[forced->first % n];
    v.min_eigenvalue = forced->second;
    v.reason = "diagonal moment of basis word '" + m.pres->display(w) +
               "' is forced to " + std::to_string(forced->second);
    return v;
  }

  set.finalize();
  DykstraResult r =
      dykstra_psd_affine(set, opt.tol, opt.max_iter, opt.stall_window);
  FeasibilityVerdict v = detail::map_projection_result(r);
  if (v.feasible()) v.assignment = assignment_at(r.coords);
  return v;
}

// Finite-dimensional marginal problem: is there a density matrix (PSD,
// trace 1) whose diagonal in each given unitary basis matches the given
// probability vector? This is the same alternating-projection engine on the
// embedded matrices, with the affine set cut out by the trace and marginal
// constraints.
inline FeasibilityVerdict density_marginal_feasible(
    int n,
    const std::vector<std::pair<ComplexMatrix, std::vector<double>>>& marginals,
    const SolveOptions& opt = {}, ComplexMatrix* witness = nullptr) {
  if (n < 1) throw Error("density dimension must be positive");
  for (const auto& [u, probs] : marginals) {
    if (u.rows() != n || u.cols() != n)
      throw Error("basis matrix must be " + std::to_string(n) + "x" +
                  std::to_string(n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Complex dot = 0.0;
        for (int k = 0; k < n; ++k) dot += u(i, k) * std::conj(u(j, k));
        if (std::abs(dot - Complex(i == j ? 1.0 : 0.0)) > 1e-10)
          throw Error("basis matrix is not unitary");
      }
    if (int(probs.size()) != n)
      throw Error("probability vector length must match the dimension");
    double sum = 0.0;
    for (double p : probs) {
      if (p < 0.0) throw Error("probabilities must be nonnegative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw Error("probability vector must sum to 1");
  }

  // real coordinates of a Hermitian rho: X_ii, then X_ij and Y_ij for i<j
  int n_coords = n * n;
  auto x_diag = [&](int i) { return i; };
  auto xy_off = [&](int i, int j) {
    // packed index of the (i,j) upper-triangle pair, two coords per pair
    int pair = i * n - i * (i + 1) / 2 + (j - i - 1);
    return std::make_pair(n + 2 * pair, n + 2 * pair + 1);
  };
  auto rho_of = [&](const std::vector<double>& x) {
    ComplexMatrix rho(n, n);
    for (int i = 0; i < n; ++i) rho(i, i) = x[x_diag(i)];
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        auto [xr, xi] = xy_off(i, j);
        rho(i, j) = Complex(x[xr], x[xi]);
        rho(j, i) = Complex(x[xr], -x[xi]);
      }
    return rho;
  };

  std::vector<detail::RealRow> rows;
  {
    detail::RealRow trace;
    trace.a.assign(n_coords, 0.0);
    for (int i = 0; i < n; ++i) trace.a[x_diag(i)] = 1.0;
    trace.rhs = 1.0;
    rows.push_back(std::move(trace));
  }
  for (const auto& [u, probs] : marginals) {
    for (int k = 0; k < n; ++k) {
      // projector onto basis vector k: A = u e_k e_k† u†, tr(A rho) = p_k
      detail::RealRow row;
      row.a.assign(n_coords, 0.0);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          Complex aij = u(i, k) * std::conj(u(j, k));
          if (i == j)
            row.a[x_diag(i)] += aij.real();
          else if (i < j) {
            auto [xr, xi] = xy_off(i, j);
            row.a[xr] += 2.0 * aij.real();
            row.a[xi] += 2.0 * aij.imag();
          }
        }
      }
      row.rhs = probs[k];
      rows.push_back(std::move(row));
    }
  }

  RealMatrix a(int(rows.size()), n_coords);
  std::vector<double> b(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int c = 0; c < n_coords; ++c) a(int(r), c) = rows[r].a[c];
    b[r] = rows[r].rhs;
  }
  AffineSolution sol = solve_affine(std::move(a), std::move(b));
  if (!sol.consistent) {
    FeasibilityVerdict v;
    v.outcome = FeasibilityVerdict::Outcome::infeasible_certified;
    v.reason = "the marginal constraints are linearly inconsistent";
    return v;
  }

  AffineMatrixSet set;
  set.offset = embed_hermitian(rho_of(sol.particular));
  detail::symmetrize(set.offset);
  double e0_min = min_eigenvalue(set.offset);
  if (e0_min >= -opt.tol) {
    FeasibilityVerdict v;
    v.outcome = FeasibilityVerdict::Outcome::feasible;
    v.min_eigenvalue = e0_min;
    if (witness) *witness = rho_of(sol.particular);
    return v;
  }
  for (const std::vector<double>& z : sol.nullspace) {
    RealMatrix e = embed_hermitian(rho_of(z));
    detail::symmetrize(e);
    set.basis.push_back(std::move(e));
  }
  if (auto forced = detail::forced_negative_diagonal(set, opt.tol)) {
    FeasibilityVerdict v;
    v.outcome = FeasibilityVerdict::Outcome::infeasible_certified;
    v.min_eigenvalue = forced->second;
    v.reason = "diagonal density entry " +
               std::to_string(forced->first % n) + " is forced to " +
               std::to_string(forced->second);
    return v;
  }
  set.finalize();
  DykstraResult r =
      dykstra_psd_affine(set, opt.tol, opt.max_iter, opt.stall_window);
  FeasibilityVerdict v = detail::map_projection_result(r);
  if (v.feasible() && witness) *witness = unembed_hermitian(r.point);
  return v;
}

}  // namespace ncq
