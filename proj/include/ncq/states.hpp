#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ncq/algebra.hpp"

namespace ncq {

// Diagnostics a state evaluation can report back (currently only the ladder
// truncation of the oscillator Gibbs state).
struct EvalDiagnostics {
  int gibbs_truncation = 0;
  double gibbs_tail_weight = 0.0;
  bool truncation_warning = false;
};

struct StateSpec {
  enum class Kind { fock, gaussian, gibbs_oscillator, moment_table };
  Kind kind = Kind::fock;
  double sigma = 1.0;   // gaussian: standard deviation
  double beta = 1.0;    // gibbs: inverse temperature
  double h = 1.0;       // gibbs: deformation parameter
  int truncation = 0;   // gibbs: ladder dimension per mode, 0 = auto
  TermMap table;        // moment_table: canonical word -> moment

  static StateSpec fock() { return {}; }

  static StateSpec gaussian(double sigma) {
    StateSpec s;
    s.kind = Kind::gaussian;
    s.sigma = sigma;
    return s;
  }

  static StateSpec gibbs_oscillator(double beta, double h, int truncation = 0) {
    StateSpec s;
    s.kind = Kind::gibbs_oscillator;
    s.beta = beta;
    s.h = h;
    s.truncation = truncation;
    return s;
  }

  static StateSpec moment_table(TermMap table) {
    StateSpec s;
    s.kind = Kind::moment_table;
    s.table = std::move(table);
    return s;
  }

  const char* kind_name() const {
    switch (kind) {
      case Kind::fock: return "fock";
      case Kind::gaussian: return "gaussian";
      case Kind::gibbs_oscillator: return "gibbs_oscillator";
      case Kind::moment_table: return "moment_table";
    }
    return "?";
  }
};

// E[x^m] for x ~ N(0, sigma^2): zero for odd m, (m-1)!! sigma^m for even m.
inline double gaussian_moment(int m, double sigma) {
  if (m < 0) throw Error("negative moment order");
  if (sigma <= 0.0) throw Error("gaussian sigma must be positive");
  if (m % 2) return 0.0;
  double v = 1.0;
  for (int k = m - 1; k > 1; k -= 2) v *= k;
  return v * std::pow(sigma, m);
}

// Vacuum expectation: normal order and read off the unit coefficient. In a
// (gram-)boltzmann algebra every canonical non-unit word annihilates or is
// orthogonal to the vacuum, so nothing else contributes.
inline Complex fock_evaluate(const Polynomial& x) {
  const PresentationPtr& p = x.presentation();
  if (!p) return x.constant_term();
  auto c = p->algebra_class();
  if (c != AlgebraClass::boltzmann && c != AlgebraClass::gram_boltzmann)
    throw Error("fock state is defined for boltzmann presentations");
  return normal_form(x).constant_term();
}

// Number of non-crossing pair matchings of the positions where only equal
// labels may pair. Odd lengths have none; the empty sequence has exactly one.
inline long count_noncrossing_pair_matchings(const std::vector<int>& labels) {
  if (labels.size() % 2) return 0;
  if (labels.empty()) return 1;
  long total = 0;
  // position 0 pairs at an odd offset so both sides stay even
  for (size_t j = 1; j < labels.size(); j += 2) {
    if (labels[j] != labels[0]) continue;
    std::vector<int> inner(labels.begin() + 1, labels.begin() + j);
    std::vector<int> outer(labels.begin() + j + 1, labels.end());
    total += count_noncrossing_pair_matchings(inner) *
             count_noncrossing_pair_matchings(outer);
  }
  return total;
}

namespace detail {

// Boltzmann-weight mass above the ladder cutoff, relative to the ground
// level: sum_{n>=D} e^{-beta h n} = e^{-beta h D} / (1 - e^{-beta h}).
inline double gibbs_tail_weight(double beta, double h, int D) {
  return std::exp(-beta * h * D) / (1.0 - std::exp(-beta * h));
}

inline int gibbs_auto_truncation(double beta, double h) {
  int D = 64;
  while (detail::gibbs_tail_weight(beta, h, D) > 1e-10 && D < 4096) D *= 2;
  return D;
}

// <n| W |n> for a ladder word W (letters: false = position q, true = momentum
// p), with the operators truncated to dimension D. The state vector stays
// within k steps of n, so we track just that window.
inline Complex ladder_diagonal(const std::vector<bool>& letters, int n,
                               double h, int D) {
  int k = static_cast<int>(letters.size());
  int base = n - k;
  std::vector<Complex> cur(2 * k + 1), next(2 * k + 1);
  cur[k] = 1.0;
  double s = std::sqrt(h / 2.0);
  // apply right to left
  for (int t = k - 1; t >= 0; --t) {
    bool is_p = letters[t];
    for (int j = 0; j <= 2 * k; ++j) {
      int m = base + j;
      if (m < 0 || m >= D) {
        next[j] = 0.0;
        continue;
      }
      Complex lo = j > 0 ? cur[j - 1] : Complex(0.0);  // amplitude at m-1
      Complex hi = j < 2 * k ? cur[j + 1] : Complex(0.0);
      double up = std::sqrt(static_cast<double>(m));        // from m-1 via a†
      double down = std::sqrt(static_cast<double>(m + 1));  // from m+1 via a
      if (is_p)
        next[j] = Complex(0.0, s) * (up * lo - down * hi);
      else
        next[j] = s * (up * lo + down * hi);
    }
    std::swap(cur, next);
  }
  return cur[k];
}

}  // namespace detail

// Thermal state of independent harmonic oscillators: q_i = sqrt(h/2)(a+a†),
// p_i = i sqrt(h/2)(a†-a), H = h(n+1/2) per mode, all truncated to a D-level
// ladder. The state factorizes over modes, so each word is evaluated one mode
// at a time; the D^modes joint dimension is never materialized but is still
// capped as a config guardrail.
inline Complex gibbs_oscillator_evaluate(const Polynomial& x, double beta,
                                         double h, int truncation = 0,
                                         EvalDiagnostics* diag = nullptr,
                                         double dim_cap = 1e12) {
  const PresentationPtr& p = x.presentation();
  if (!p || p->algebra_class() != AlgebraClass::ccr)
    throw Error("gibbs oscillator state is defined for ccr presentations");
  if (beta <= 0.0 || h <= 0.0) throw Error("gibbs state needs beta > 0, h > 0");
  if (std::abs(p->parameter("h", 1.0) - h) > 1e-12)
    throw Error("gibbs state parameter h does not match the presentation");
  int D = truncation > 0 ? truncation : detail::gibbs_auto_truncation(beta, h);
  if (D < 2) throw Error("gibbs truncation must be at least 2");
  int modes = p->modes();
  if (std::pow(static_cast<double>(D), modes) > dim_cap)
    throw Error("joint ladder dimension D^modes exceeds the configured cap");

  double tail = detail::gibbs_tail_weight(beta, h, D);
  if (diag) {
    diag->gibbs_truncation = D;
    diag->gibbs_tail_weight = tail;
    diag->truncation_warning = tail > 1e-10;
  }

  double z = 0.0;
  std::vector<double> weight(D);
  for (int n = 0; n < D; ++n) {
    weight[n] = std::exp(-beta * h * n);
    z += weight[n];
  }
  // Ignore levels whose weight cannot move the ratio.
  int n_top = D;
  while (n_top > 1 && weight[n_top - 1] < 1e-18) --n_top;

  Polynomial nf = normal_form(x);
  Complex total = 0.0;
  for (const auto& [w, c] : nf.terms()) {
    Complex word_val = 1.0;
    for (int m = 0; m < modes && word_val != Complex(0.0); ++m) {
      std::vector<bool> letters;  // this mode's ladder word, left to right
      for (int g : w)
        if (g == m)
          letters.push_back(false);
        else if (g == modes + m)
          letters.push_back(true);
      if (letters.empty()) continue;
      Complex acc = 0.0;
      for (int n = 0; n < n_top; ++n)
        acc += weight[n] * detail::ladder_diagonal(letters, n, h, D);
      word_val *= acc / z;
    }
    total += c * word_val;
  }
  return total;
}

inline void validate_state(const StateSpec& s, const PresentationPtr& pres) {
  auto cls = pres->algebra_class();
  switch (s.kind) {
    case StateSpec::Kind::fock:
      if (cls != AlgebraClass::boltzmann && cls != AlgebraClass::gram_boltzmann)
        throw Error("fock state requires a boltzmann presentation");
      break;
    case StateSpec::Kind::gaussian:
      if (cls != AlgebraClass::commutative)
        throw Error("gaussian state requires a commutative presentation");
      if (s.sigma <= 0.0) throw Error("gaussian sigma must be positive");
      break;
    case StateSpec::Kind::gibbs_oscillator:
      if (cls != AlgebraClass::ccr)
        throw Error("gibbs oscillator state requires a ccr presentation");
      if (s.beta <= 0.0 || s.h <= 0.0)
        throw Error("gibbs state needs beta > 0, h > 0");
      if (s.truncation != 0 && s.truncation < 2)
        throw Error("gibbs truncation must be at least 2");
      if (std::abs(pres->parameter("h", 1.0) - s.h) > 1e-12)
        throw Error("gibbs state parameter h does not match the presentation");
      break;
    case StateSpec::Kind::moment_table: {
      auto unit = s.table.find(Word{});
      if (unit == s.table.end() || std::abs(unit->second - Complex(1.0)) > 1e-12)
        throw Error("moment table must map the empty word to 1");
      for (const auto& [w, v] : s.table) {
        Polynomial adj = normal_form(adjoint(Polynomial::monomial(pres, w)));
        if (adj.terms().size() != 1) continue;
        const auto& [aw, ac] = *adj.terms().begin();
        if (std::abs(ac - Complex(1.0)) > 1e-12) continue;
        auto it = s.table.find(aw);
        if (it != s.table.end() && std::abs(it->second - std::conj(v)) > 1e-9)
          throw Error("moment table is not Hermitian-consistent at word '" +
                      pres->display(w) + "'");
      }
      break;
    }
  }
}

inline Complex state_evaluate(const StateSpec& s, const Polynomial& x,
                              EvalDiagnostics* diag = nullptr) {
  const PresentationPtr& p = x.presentation();
  if (!p) return x.constant_term();
  switch (s.kind) {
    case StateSpec::Kind::fock:
      validate_state(s, p);
      return fock_evaluate(x);
    case StateSpec::Kind::gaussian: {
      validate_state(s, p);
      Polynomial nf = normal_form(x);
      Complex total = 0.0;
      for (const auto& [w, c] : nf.terms()) {
        double v = 1.0;
        int run = 0;
        for (size_t i = 0; i <= w.size(); ++i) {
          if (i > 0 && (i == w.size() || w[i] != w[i - 1])) {
            v *= gaussian_moment(run, s.sigma);
            run = 0;
          }
          if (i < w.size()) ++run;
        }
        total += c * v;
      }
      return total;
    }
    case StateSpec::Kind::gibbs_oscillator:
      return gibbs_oscillator_evaluate(x, s.beta, s.h, s.truncation, diag);
    case StateSpec::Kind::moment_table: {
      Polynomial nf = normal_form(x);
      Complex total = 0.0;
      for (const auto& [w, c] : nf.terms()) {
        auto it = s.table.find(w);
        if (it == s.table.end())
          throw Error("moment table has no entry for word '" + p->display(w) +
                      "'");
        total += c * it->second;
      }
      return total;
    }
  }
  throw Error("unknown state kind");
}

struct MomentEntry {
  std::string expression;
  int canonical_words = 0;
  Complex value;
};

struct MomentReport {
  std::vector<MomentEntry> entries;
  std::string state_kind;
  std::uint64_t presentation_hash = 0;
  std::map<std::string, double> parameters;
};

}  // namespace ncq
