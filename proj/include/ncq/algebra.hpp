#pragma once

#include <algorithm>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ncq/error.hpp"

namespace ncq {

using Complex = std::complex<double>;

// A word is a product of generator ids; the empty word is the unit.
using Word = std::vector<int>;

// Length first, then lexicographic by generator id. This is the canonical
// ordering used for term maps and moment-matrix bases.
struct WordOrder {
  bool operator()(const Word& a, const Word& b) const noexcept {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  }
};

using TermMap = std::map<Word, Complex, WordOrder>;

struct GeneratorSymbol {
  std::string name;
  int index = 0;    // position in the presentation's generator list
  int adjoint = 0;  // id of the adjoint partner; equals index when self-adjoint
  bool self_adjoint() const { return adjoint == index; }
};

enum class AlgebraClass { boltzmann, ccr, gram_boltzmann, commutative, custom };

inline const char* to_string(AlgebraClass c) {
  switch (c) {
    case AlgebraClass::boltzmann: return "boltzmann";
    case AlgebraClass::ccr: return "ccr";
    case AlgebraClass::gram_boltzmann: return "gram_boltzmann";
    case AlgebraClass::commutative: return "commutative";
    case AlgebraClass::custom: return "custom";
  }
  return "?";
}

// Left sides are always two letters; right sides never exceed degree two, so
// a rewrite step can reorder or shorten a word but never lengthen it.
struct RewriteRule {
  Word lhs;
  TermMap rhs;
};

// Coefficients below this magnitude are dropped after each reduction pass.
inline constexpr double kCoeffPrune = 1e-12;
// Cancellation dust from ordinary arithmetic is cut more aggressively.
inline constexpr double kArithPrune = 1e-15;

class Presentation;
using PresentationPtr = std::shared_ptr<const Presentation>;

// A finitely presented *-algebra: generators with an adjoint involution and
// two-letter rewrite rules. Instances are immutable; share them freely.
class Presentation {
 public:
  static PresentationPtr boltzmann(int modes);
  static PresentationPtr ccr(int modes, double h);
  static PresentationPtr gram_boltzmann(int modes, std::vector<Complex> gram);
  static PresentationPtr commutative(int generators);
  static PresentationPtr custom(std::vector<GeneratorSymbol> generators,
                                std::vector<RewriteRule> rules,
                                std::map<std::string, double> parameters);

  int size() const { return static_cast<int>(gens_.size()); }
  const GeneratorSymbol& generator(int id) const { return gens_.at(id); }
  const std::vector<GeneratorSymbol>& generators() const { return gens_; }
  int adjoint_of(int id) const { return gens_.at(id).adjoint; }
  AlgebraClass algebra_class() const { return class_; }
  const std::vector<RewriteRule>& rules() const { return rules_; }
  const std::map<std::string, double>& parameters() const { return params_; }
  int modes() const { return modes_; }
  std::uint64_t hash() const { return hash_; }

  double parameter(const std::string& name, double fallback) const {
    auto it = params_.find(name);
    return it == params_.end() ? fallback : it->second;
  }

  std::optional<int> find(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
  }

  // First rule (in declaration order) whose left side is ab, or -1.
  int rule_at(int a, int b) const {
    auto it = rule_lookup_.find(pack(a, b));
    return it == rule_lookup_.end() ? -1 : it->second;
  }

  Word adjoint_word(const Word& w) const {
    Word r(w.rbegin(), w.rend());
    for (int& g : r) g = adjoint_of(g);
    return r;
  }

  // Display form: the trailing prime of an adjoint generator renders as a
  // dagger, so "A1'" prints as "A1†".
  std::string display_name(int id) const {
    const std::string& n = gens_.at(id).name;
    if (!n.empty() && n.back() == '\'')
      return n.substr(0, n.size() - 1) + "†";
    return n;
  }

  std::string display(const Word& w) const {
    if (w.empty()) return "1";
    std::string out;
    for (size_t i = 0; i < w.size(); ++i) {
      if (i) out += ' ';
      out += display_name(w[i]);
    }
    return out;
  }

 private:
  Presentation() = default;

  static std::uint64_t pack(int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
  }

  void index_names() {
    for (int i = 0; i < size(); ++i) {
      if (gens_[i].name.empty()) throw Error("generator with empty name");
      if (gens_[i].name == "i")
        throw Error("generator name 'i' is reserved for the imaginary unit");
      if (!by_name_.emplace(gens_[i].name, i).second)
        throw Error("duplicate generator name: " + gens_[i].name);
      gens_[i].index = i;
    }
    for (int i = 0; i < size(); ++i) {
      int a = gens_[i].adjoint;
      if (a < 0 || a >= size() || gens_[a].adjoint != i)
        throw Error("adjoint pairing is not an involution");
    }
  }

  void index_rules() {
    for (int r = 0; r < static_cast<int>(rules_.size()); ++r) {
      const RewriteRule& rule = rules_[r];
      if (rule.lhs.size() != 2)
        throw Error("rewrite rule left side must have exactly two letters");
      for (int g : rule.lhs)
        if (g < 0 || g >= size()) throw Error("rule references unknown generator");
      for (const auto& [w, c] : rule.rhs) {
        (void)c;
        if (w.size() > 2)
          throw Error("rewrite rule right side exceeds degree 2");
        for (int g : w)
          if (g < 0 || g >= size())
            throw Error("rule references unknown generator");
      }
      rule_lookup_.try_emplace(pack(rule.lhs[0], rule.lhs[1]), r);
    }
  }

  void finalize() {
    index_names();
    index_rules();
    hash_ = content_hash();
  }

  std::uint64_t content_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
      for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= 1099511628211ull;
      }
    };
    auto mix_str = [&](const std::string& s) {
      mix(s.size());
      for (unsigned char c : s) mix(c);
    };
    auto mix_double = [&](double d) {
      std::uint64_t bits;
      static_assert(sizeof bits == sizeof d);
      std::memcpy(&bits, &d, sizeof bits);
      mix(bits);
    };
    mix(static_cast<std::uint64_t>(class_));
    mix(gens_.size());
    for (const auto& g : gens_) {
      mix_str(g.name);
      mix(static_cast<std::uint64_t>(g.adjoint));
    }
    mix(rules_.size());
    for (const auto& r : rules_) {
      for (int g : r.lhs) mix(static_cast<std::uint64_t>(g));
      mix(r.rhs.size());
      for (const auto& [w, c] : r.rhs) {
        mix(w.size());
        for (int g : w) mix(static_cast<std::uint64_t>(g));
        mix_double(c.real());
        mix_double(c.imag());
      }
    }
    mix(params_.size());
    for (const auto& [k, v] : params_) {
      mix_str(k);
      mix_double(v);
    }
    return h;
  }

  std::vector<GeneratorSymbol> gens_;
  std::vector<RewriteRule> rules_;
  std::map<std::string, double> params_;
  AlgebraClass class_ = AlgebraClass::custom;
  int modes_ = 0;
  std::uint64_t hash_ = 0;
  std::unordered_map<std::string, int> by_name_;
  std::unordered_map<std::uint64_t, int> rule_lookup_;
};

inline PresentationPtr Presentation::boltzmann(int modes) {
  if (modes < 1) throw Error("boltzmann presentation needs at least one mode");
  auto p = std::shared_ptr<Presentation>(new Presentation);
  p->class_ = AlgebraClass::boltzmann;
  p->modes_ = modes;
  auto base = [&](int i) {
    return modes == 1 ? std::string("A") : "A" + std::to_string(i + 1);
  };
  for (int i = 0; i < modes; ++i)
    p->gens_.push_back({base(i), i, modes + i});
  for (int i = 0; i < modes; ++i)
    p->gens_.push_back({base(i) + "'", modes + i, i});
  // A_i A_j' -> delta_ij; the off-diagonal products vanish outright.
  for (int i = 0; i < modes; ++i)
    for (int j = 0; j < modes; ++j) {
      RewriteRule r;
      r.lhs = {i, modes + j};
      if (i == j) r.rhs[{}] = 1.0;
      p->rules_.push_back(std::move(r));
    }
  p->finalize();
  return p;
}

inline PresentationPtr Presentation::ccr(int modes, double h) {
  if (modes < 1) throw Error("ccr presentation needs at least one mode");
  auto p = std::shared_ptr<Presentation>(new Presentation);
  p->class_ = AlgebraClass::ccr;
  p->modes_ = modes;
  p->params_["h"] = h;
  auto qname = [&](int i) {
    return modes == 1 ? std::string("q") : "q" + std::to_string(i + 1);
  };
  auto pname = [&](int i) {
    return modes == 1 ? std::string("p") : "p" + std::to_string(i + 1);
  };
  for (int i = 0; i < modes; ++i) p->gens_.push_back({qname(i), i, i});
  for (int i = 0; i < modes; ++i)
    p->gens_.push_back({pname(i), modes + i, modes + i});
  // Normal order is the sorted q block followed by the sorted p block.
  // [p_i, q_j] = -i h delta_ij, so p_i q_j -> q_j p_i - i h delta_ij.
  for (int i = 0; i < modes; ++i)
    for (int j = 0; j < modes; ++j) {
      RewriteRule r;
      r.lhs = {modes + i, j};
      r.rhs[{j, modes + i}] = 1.0;
      if (i == j) r.rhs[{}] = Complex(0.0, -h);
      p->rules_.push_back(std::move(r));
    }
  for (int j = 1; j < modes; ++j)
    for (int i = 0; i < j; ++i) {
      p->rules_.push_back({{j, i}, {{{i, j}, 1.0}}});
      p->rules_.push_back({{modes + j, modes + i}, {{{modes + i, modes + j}, 1.0}}});
    }
  p->finalize();
  return p;
}

inline PresentationPtr Presentation::gram_boltzmann(int modes,
                                                    std::vector<Complex> gram) {
  if (modes < 1)
    throw Error("gram_boltzmann presentation needs at least one mode");
  if (static_cast<int>(gram.size()) != modes * modes)
    throw Error("gram matrix must have modes^2 entries");
  for (int i = 0; i < modes; ++i)
    for (int j = 0; j < modes; ++j)
      if (std::abs(gram[i * modes + j] - std::conj(gram[j * modes + i])) > 1e-12)
        throw Error("gram matrix is not Hermitian");
  auto p = std::shared_ptr<Presentation>(new Presentation);
  p->class_ = AlgebraClass::gram_boltzmann;
  p->modes_ = modes;
  auto base = [&](int i) {
    return modes == 1 ? std::string("A") : "A" + std::to_string(i + 1);
  };
  for (int i = 0; i < modes; ++i)
    p->gens_.push_back({base(i), i, modes + i});
  for (int i = 0; i < modes; ++i)
    p->gens_.push_back({base(i) + "'", modes + i, i});
  for (int i = 0; i < modes; ++i)
    for (int j = 0; j < modes; ++j) {
      RewriteRule r;
      r.lhs = {i, modes + j};
      Complex g = gram[i * modes + j];
      if (std::abs(g) > 0.0) r.rhs[{}] = g;
      p->rules_.push_back(std::move(r));
    }
  p->finalize();
  return p;
}

inline PresentationPtr Presentation::commutative(int generators) {
  if (generators < 1)
    throw Error("commutative presentation needs at least one generator");
  auto p = std::shared_ptr<Presentation>(new Presentation);
  p->class_ = AlgebraClass::commutative;
  p->modes_ = generators;
  auto name = [&](int i) {
    return generators == 1 ? std::string("x") : "x" + std::to_string(i + 1);
  };
  for (int i = 0; i < generators; ++i) p->gens_.push_back({name(i), i, i});
  for (int j = 1; j < generators; ++j)
    for (int i = 0; i < j; ++i) p->rules_.push_back({{j, i}, {{{i, j}, 1.0}}});
  p->finalize();
  return p;
}

inline PresentationPtr Presentation::custom(
    std::vector<GeneratorSymbol> generators, std::vector<RewriteRule> rules,
    std::map<std::string, double> parameters) {
  auto p = std::shared_ptr<Presentation>(new Presentation);
  p->class_ = AlgebraClass::custom;
  p->modes_ = static_cast<int>(generators.size());
  p->gens_ = std::move(generators);
  p->rules_ = std::move(rules);
  p->params_ = std::move(parameters);
  p->finalize();
  return p;
}

namespace detail {

inline bool compatible(const PresentationPtr& a, const PresentationPtr& b) {
  if (!a || !b || a == b) return true;
  return a->hash() == b->hash();
}

inline std::string format_complex(Complex c) {
  char buf[64];
  if (std::abs(c.imag()) < 1e-14) {
    std::snprintf(buf, sizeof buf, "%g", c.real());
    return buf;
  }
  if (std::abs(c.real()) < 1e-14) {
    std::snprintf(buf, sizeof buf, "%gi", c.imag());
    return buf;
  }
  std::snprintf(buf, sizeof buf, "(%g%+gi)", c.real(), c.imag());
  return buf;
}

}  // namespace detail

// A finite linear combination of words with complex coefficients. Immutable
// in spirit: operations return new values, and zero coefficients never
// survive an operation.
class Polynomial {
 public:
  Polynomial() = default;

  static Polynomial zero(PresentationPtr p) {
    Polynomial x;
    x.pres_ = std::move(p);
    return x;
  }

  static Polynomial scalar(PresentationPtr p, Complex c) {
    Polynomial x = zero(std::move(p));
    x.add_term({}, c);
    return x;
  }

  static Polynomial monomial(PresentationPtr p, Word w, Complex c = 1.0) {
    Polynomial x = zero(std::move(p));
    if (x.pres_)
      for (int g : w)
        if (g < 0 || g >= x.pres_->size())
          throw Error("word references unknown generator");
    x.add_term(std::move(w), c);
    return x;
  }

  static Polynomial generator(PresentationPtr p, int id) {
    return monomial(std::move(p), Word{id});
  }

  const TermMap& terms() const { return terms_; }
  const PresentationPtr& presentation() const { return pres_; }
  bool is_zero() const { return terms_.empty(); }

  int degree() const {
    int d = 0;
    for (const auto& [w, c] : terms_) d = std::max(d, static_cast<int>(w.size()));
    return d;
  }

  Complex coefficient(const Word& w) const {
    auto it = terms_.find(w);
    return it == terms_.end() ? Complex(0.0) : it->second;
  }

  Complex constant_term() const { return coefficient({}); }

  void add_term(Word w, Complex c) {
    auto [it, fresh] = terms_.try_emplace(std::move(w), c);
    if (!fresh) {
      it->second += c;
      if (std::norm(it->second) < kArithPrune * kArithPrune) terms_.erase(it);
    } else if (std::norm(it->second) < kArithPrune * kArithPrune) {
      terms_.erase(it);
    }
  }

  Polynomial& operator+=(const Polynomial& o) {
    adopt(o);
    for (const auto& [w, c] : o.terms_) add_term(w, c);
    return *this;
  }

  Polynomial& operator-=(const Polynomial& o) {
    adopt(o);
    for (const auto& [w, c] : o.terms_) add_term(w, -c);
    return *this;
  }

  Polynomial& operator*=(Complex s) {
    if (std::norm(s) < kArithPrune * kArithPrune) {
      terms_.clear();
      return *this;
    }
    for (auto& [w, c] : terms_) c *= s;
    return *this;
  }

  Polynomial& operator*=(const Polynomial& o) {
    adopt(o);
    TermMap out;
    for (const auto& [wa, ca] : terms_)
      for (const auto& [wb, cb] : o.terms_) {
        Word w = wa;
        w.insert(w.end(), wb.begin(), wb.end());
        auto [it, fresh] = out.try_emplace(std::move(w), ca * cb);
        if (!fresh) it->second += ca * cb;
      }
    terms_.clear();
    for (auto& [w, c] : out)
      if (std::norm(c) >= kArithPrune * kArithPrune)
        terms_.emplace(w, c);
    return *this;
  }

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, const Polynomial& b) { return a *= b; }
  friend Polynomial operator*(Polynomial a, Complex s) { return a *= s; }
  friend Polynomial operator*(Complex s, Polynomial a) { return a *= s; }
  friend Polynomial operator-(Polynomial a) { return a *= Complex(-1.0); }

  Polynomial pow(int k) const {
    if (k < 0) throw Error("negative exponent");
    Polynomial acc = scalar(pres_, 1.0);
    for (int i = 0; i < k; ++i) acc *= *this;
    return acc;
  }

  // Largest coefficient magnitude of the difference; the workhorse for
  // approximate equality in tests and verifiers.
  double distance(const Polynomial& o) const {
    double m = 0.0;
    auto ia = terms_.begin();
    auto ib = o.terms_.begin();
    WordOrder lt;
    while (ia != terms_.end() || ib != o.terms_.end()) {
      if (ib == o.terms_.end() ||
          (ia != terms_.end() && lt(ia->first, ib->first))) {
        m = std::max(m, std::abs(ia->second));
        ++ia;
      } else if (ia == terms_.end() || lt(ib->first, ia->first)) {
        m = std::max(m, std::abs(ib->second));
        ++ib;
      } else {
        m = std::max(m, std::abs(ia->second - ib->second));
        ++ia;
        ++ib;
      }
    }
    return m;
  }

  double max_coefficient() const {
    double m = 0.0;
    for (const auto& [w, c] : terms_) m = std::max(m, std::abs(c));
    return m;
  }

  void prune(double tol) {
    for (auto it = terms_.begin(); it != terms_.end();)
      it = std::abs(it->second) < tol ? terms_.erase(it) : std::next(it);
  }

  std::string str() const {
    if (terms_.empty()) return "0";
    std::string out;
    for (const auto& [w, c] : terms_) {
      if (!out.empty()) out += " + ";
      out += detail::format_complex(c);
      if (!w.empty()) {
        out += ' ';
        out += pres_ ? pres_->display(w) : std::string("?");
      }
    }
    return out;
  }

 private:
  void adopt(const Polynomial& o) {
    if (!detail::compatible(pres_, o.pres_))
      throw Error("mismatched presentations");
    if (!pres_) pres_ = o.pres_;
  }

  PresentationPtr pres_;
  TermMap terms_;
};

// The adjoint reverses each word, swaps every letter for its partner and
// conjugates coefficients.
inline Polynomial adjoint(const Polynomial& x) {
  const PresentationPtr& p = x.presentation();
  Polynomial out = Polynomial::zero(p);
  for (const auto& [w, c] : x.terms()) {
    if (!p && !w.empty()) throw Error("adjoint of a word needs a presentation");
    out.add_term(p ? p->adjoint_word(w) : Word{}, std::conj(c));
  }
  return out;
}

inline Polynomial multiply(const Polynomial& a, const Polynomial& b) {
  return a * b;
}

enum class RewriteOrder { leftmost, rightmost };

struct NormalFormOptions {
  RewriteOrder order = RewriteOrder::leftmost;
  // Custom rule sets may cycle; presets are known terminating and ignore this.
  std::uint64_t step_budget = 100000;
};

// Rewrites until no rule applies. Each pass reduces the first redex of every
// word (scanning direction per options), so the result is deterministic; for
// the preset classes both scan orders give the same canonical form.
inline Polynomial normal_form(const Polynomial& x,
                              const NormalFormOptions& opt = {}) {
  const PresentationPtr& p = x.presentation();
  if (!p || p->rules().empty()) return x;
  const bool budgeted = p->algebra_class() == AlgebraClass::custom;

  std::uint64_t steps = 0;
  std::vector<std::string> history;
  Polynomial cur = x;
  for (;;) {
    Polynomial next = Polynomial::zero(p);
    bool changed = false;
    for (const auto& [w, c] : cur.terms()) {
      int pos = -1, rule = -1;
      if (opt.order == RewriteOrder::leftmost) {
        for (size_t i = 0; i + 1 < w.size(); ++i)
          if (int r = p->rule_at(w[i], w[i + 1]); r >= 0) {
            pos = static_cast<int>(i);
            rule = r;
            break;
          }
      } else {
        for (size_t i = w.size(); i >= 2; --i)
          if (int r = p->rule_at(w[i - 2], w[i - 1]); r >= 0) {
            pos = static_cast<int>(i - 2);
            rule = r;
            break;
          }
      }
      if (pos < 0) {
        next.add_term(w, c);
        continue;
      }
      changed = true;
      ++steps;
      if (budgeted && steps > opt.step_budget) {
        std::string h;
        for (const auto& s : history) h += s + "\n";
        h += cur.str();
        throw RewriteBudgetError(
            "rewrite budget of " + std::to_string(opt.step_budget) +
                " steps exhausted; the rule set may not terminate",
            h);
      }
      for (const auto& [rw, rc] : p->rules()[rule].rhs) {
        Word nw;
        nw.reserve(w.size() - 2 + rw.size());
        nw.insert(nw.end(), w.begin(), w.begin() + pos);
        nw.insert(nw.end(), rw.begin(), rw.end());
        nw.insert(nw.end(), w.begin() + pos + 2, w.end());
        next.add_term(std::move(nw), c * rc);
      }
    }
    next.prune(kCoeffPrune);
    if (!changed) return next;
    if (budgeted) {
      history.push_back(next.str());
      if (history.size() > 3) history.erase(history.begin());
    }
    cur = std::move(next);
  }
}

}  // namespace ncq
