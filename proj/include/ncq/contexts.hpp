#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ncq/algebra.hpp"
#include "ncq/moments.hpp"
#include "ncq/states.hpp"

// Contexts: *-homomorphisms from a source probability space into a target
// algebra, plus the verification battery that makes a family of them a
// quantization of the sources: each map must respect the source relations,
// be injective (probed at truncated degree), reproduce the source moments
// through the target state (exactly or in the h -> 0 limit), jointly
// generate the target, and admit one target state consistent with every
// context's moments (the moment-matrix feasibility check).

namespace ncq {

class ContextMap {
 public:
  // images[g] is the target polynomial substituted for source generator g;
  // every generator needs an image, and adjoint partners must map to
  // adjoints of each other.
  ContextMap(PresentationPtr source, PresentationPtr target,
             std::vector<Polynomial> images, std::string label)
      : source_(std::move(source)),
        target_(std::move(target)),
        images_(std::move(images)),
        label_(std::move(label)) {
    if (int(images_.size()) != source_->size())
      throw Error("context '" + label_ + "' needs an image for each of the " +
                  std::to_string(source_->size()) + " source generators");
    for (Polynomial& img : images_) img = normal_form(img);
    for (int g = 0; g < source_->size(); ++g) {
      int ga = source_->adjoint_of(g);
      if (images_[ga].distance(normal_form(adjoint(images_[g]))) > 1e-10)
        throw Error("context '" + label_ + "' does not respect adjoints at '" +
                    source_->generator(g).name + "'");
    }
  }

  // Fill missing images from adjoint partners: giving only f(a) determines
  // f(a*) = f(a)*.
  static ContextMap from_partial(PresentationPtr source,
                                 PresentationPtr target,
                                 const std::map<int, Polynomial>& given,
                                 std::string label) {
    std::vector<Polynomial> images(source->size(), Polynomial::zero(target));
    for (int g = 0; g < source->size(); ++g) {
      auto it = given.find(g);
      if (it != given.end()) {
        images[g] = it->second;
        continue;
      }
      auto partner = given.find(source->adjoint_of(g));
      if (partner == given.end())
        throw Error("substitution is missing generator '" +
                    source->generator(g).name + "'");
      images[g] = adjoint(partner->second);
    }
    return ContextMap(std::move(source), std::move(target), std::move(images),
                      std::move(label));
  }

  const PresentationPtr& source() const { return source_; }
  const PresentationPtr& target() const { return target_; }
  const Polynomial& image(int g) const { return images_[g]; }
  const std::vector<Polynomial>& images() const { return images_; }
  const std::string& label() const { return label_; }

 private:
  PresentationPtr source_, target_;
  std::vector<Polynomial> images_;
  std::string label_;
};

inline Polynomial apply_context(const ContextMap& f, const Polynomial& x) {
  if (x.presentation() &&
      x.presentation()->hash() != f.source()->hash())
    throw Error("polynomial is not over the context's source presentation");
  Polynomial out = Polynomial::zero(f.target());
  for (const auto& [w, c] : x.terms()) {
    Polynomial term = Polynomial::scalar(f.target(), c);
    for (int g : w) term *= f.image(g);
    out += term;
  }
  return normal_form(out);
}

struct HomomorphismCheck {
  struct Violation {
    std::string rule_text;
    Polynomial residual;
  };
  bool ok = true;
  std::vector<Violation> violations;
};

// A substitution extends to a homomorphism exactly when it kills every
// defining relation: nf(f(L) - f(R)) must vanish for each rule L -> R.
inline HomomorphismCheck verify_homomorphism(const ContextMap& f) {
  HomomorphismCheck out;
  const PresentationPtr& src = f.source();
  for (const RewriteRule& rule : src->rules()) {
    Polynomial lhs = apply_context(
        f, Polynomial::monomial(src, rule.lhs));
    Polynomial rhs_src = Polynomial::zero(src);
    for (const auto& [w, c] : rule.rhs) rhs_src.add_term(w, c);
    Polynomial residual = lhs;
    residual += apply_context(f, rhs_src) * Complex(-1.0);
    residual = normal_form(residual);
    residual.prune(1e-12);
    if (residual.max_coefficient() > 1e-10) {
      out.ok = false;
      std::string text = src->display(rule.lhs) + " -> " + rhs_src.str();
      out.violations.push_back({std::move(text), std::move(residual)});
    }
  }
  return out;
}

struct InjectivityProbe {
  bool ok = false;
  int domain_dimension = 0;
  int rank = 0;
};

// Rank test of the linear map (span of source words, degree <= d) -> target
// canonical forms. Complex kernels are detected through the standard real
// doubling of each column.
inline InjectivityProbe injectivity_probe(const ContextMap& f, int d) {
  std::vector<Word> domain = enumerate_basis_words(f.source(), d);
  std::vector<Polynomial> images;
  std::map<Word, int, WordOrder> row_of;
  for (const Word& w : domain) {
    Polynomial img = apply_context(f, Polynomial::monomial(f.source(), w));
    for (const auto& [tw, c] : img.terms()) row_of.try_emplace(tw, 0);
    images.push_back(std::move(img));
  }
  int rows = 0;
  for (auto& [w, idx] : row_of) idx = rows++;
  int s = int(domain.size());
  RealMatrix a(2 * std::max(rows, 1), 2 * s);
  for (int j = 0; j < s; ++j)
    for (const auto& [tw, c] : images[j].terms()) {
      int i = row_of.at(tw);
      a(2 * i, 2 * j) = c.real();
      a(2 * i + 1, 2 * j) = c.imag();
      a(2 * i, 2 * j + 1) = -c.imag();
      a(2 * i + 1, 2 * j + 1) = c.real();
    }
  InjectivityProbe probe;
  probe.domain_dimension = s;
  probe.rank = matrix_rank(std::move(a)) / 2;
  probe.ok = probe.rank == s;
  return probe;
}

struct GenerationCheck {
  bool ok = false;
  int span_dimension = 0;
  int target_dimension = 0;
};

// Do products of at most d image factors (adjoints included) span everything
// a degree-d word in the target can reach?
inline GenerationCheck verify_generation(const PresentationPtr& target,
                                         const std::vector<Polynomial>& images,
                                         int d) {
  std::vector<Polynomial> factors;
  for (const Polynomial& img : images) {
    factors.push_back(normal_form(img));
    Polynomial adj = normal_form(adjoint(img));
    bool dup = false;
    for (const Polynomial& f : factors)
      if (f.distance(adj) <= 1e-12) dup = true;
    if (!dup) factors.push_back(std::move(adj));
  }
  double count = 1.0;
  for (int k = 1; k <= d; ++k) {
    count *= double(factors.size());
    if (count > 20000.0)
      throw Error("generation check would need more than 20000 products");
  }

  std::vector<Polynomial> products{Polynomial::scalar(target, 1.0)};
  std::size_t prev_begin = 0;
  for (int len = 1; len <= d; ++len) {
    std::size_t prev_end = products.size();
    for (std::size_t i = prev_begin; i < prev_end; ++i)
      for (const Polynomial& f : factors)
        products.push_back(normal_form(products[i] * f));
    prev_begin = prev_end;
  }

  std::map<Word, int, WordOrder> row_of;
  for (const Polynomial& p : products)
    for (const auto& [w, c] : p.terms()) row_of.try_emplace(w, 0);
  int rows = 0;
  for (auto& [w, idx] : row_of) idx = rows++;
  RealMatrix a(2 * std::max(rows, 1), 2 * int(products.size()));
  for (std::size_t j = 0; j < products.size(); ++j)
    for (const auto& [w, c] : products[j].terms()) {
      int i = row_of.at(w);
      a(2 * i, 2 * j) = c.real();
      a(2 * i + 1, 2 * j) = c.imag();
      a(2 * i, 2 * j + 1) = -c.imag();
      a(2 * i + 1, 2 * j + 1) = c.real();
    }
  GenerationCheck check;
  check.span_dimension = matrix_rank(std::move(a)) / 2;
  check.target_dimension = int(enumerate_basis_words(target, d).size());
  check.ok = check.span_dimension == check.target_dimension;
  return check;
}

struct CompatibilityCheck {
  bool compatible = true;
  Polynomial witness;  // first nonvanishing commutator, if incompatible
  std::string left_text, right_text;
};

namespace detail {

inline std::vector<Polynomial> image_products(const ContextMap& f, int d) {
  std::vector<Polynomial> out;
  for (const Polynomial& img : f.images()) out.push_back(img);
  std::size_t prev_begin = 0;
  for (int len = 2; len <= d; ++len) {
    std::size_t prev_end = out.size();
    for (std::size_t i = prev_begin; i < prev_end; ++i)
      for (int g = 0; g < f.source()->size(); ++g)
        out.push_back(out[i] * f.image(g));
    prev_begin = prev_end;
  }
  for (Polynomial& p : out) p = normal_form(p);
  return out;
}

}  // namespace detail

// Two contexts clash when some product of one's images fails to commute with
// some product of the other's; the first nonzero commutator (in enumeration
// order) is the witness.
inline CompatibilityCheck check_context_compatibility(const ContextMap& f,
                                                      const ContextMap& g,
                                                      int d) {
  if (f.target()->hash() != g.target()->hash())
    throw Error("contexts do not share a target presentation");
  CompatibilityCheck out;
  std::vector<Polynomial> fp = detail::image_products(f, d);
  std::vector<Polynomial> gp = detail::image_products(g, d);
  for (const Polynomial& x : fp)
    for (const Polynomial& y : gp) {
      Polynomial comm = normal_form(x * y);
      comm += normal_form(y * x) * Complex(-1.0);
      comm = normal_form(comm);
      comm.prune(1e-12);
      if (comm.max_coefficient() > 1e-10) {
        out.compatible = false;
        out.witness = std::move(comm);
        out.left_text = x.str();
        out.right_text = y.str();
        return out;
      }
    }
  return out;
}

struct CorrespondenceReport {
  bool ok = false;
  double final_error = 0.0;
  // one (parameter, max error over words) entry per schedule point; exact
  // mode has a single entry with parameter 0
  std::vector<std::pair<double, double>> errors;
  std::string failure;
};

inline CorrespondenceReport verify_state_correspondence_exact(
    const ContextMap& f, const StateSpec& source_state,
    const StateSpec& target_state, int d, double tol = 1e-9) {
  CorrespondenceReport rep;
  double max_err = 0.0;
  for (const Word& w : enumerate_basis_words(f.source(), d)) {
    Polynomial src = Polynomial::monomial(f.source(), w);
    Complex want = state_evaluate(source_state, src);
    Complex got = state_evaluate(target_state, apply_context(f, src));
    max_err = std::max(max_err, std::abs(got - want));
  }
  rep.errors.emplace_back(0.0, max_err);
  rep.final_error = max_err;
  rep.ok = max_err <= tol;
  if (!rep.ok)
    rep.failure = "max moment deviation " + std::to_string(max_err) +
                  " exceeds " + std::to_string(tol);
  return rep;
}

// One point of a deformation schedule: the target presentation (and hence
// the context map into it) and the target state both depend on h.
struct LimitPoint {
  double h = 0.0;
  ContextMap map;
  StateSpec target_state;
};

inline CorrespondenceReport verify_state_correspondence_limit(
    const std::vector<LimitPoint>& points, const StateSpec& source_state,
    int d, double final_tol) {
  if (points.size() < 3)
    throw Error("limit schedule needs at least 3 points");
  for (std::size_t i = 0; i + 1 < points.size(); ++i)
    if (!(points[i].h > points[i + 1].h) || points[i + 1].h <= 0.0)
      throw Error("limit schedule must decrease strictly toward 0");

  CorrespondenceReport rep;
  std::vector<Word> words =
      enumerate_basis_words(points.front().map.source(), d);
  for (const LimitPoint& pt : points) {
    double max_err = 0.0;
    for (const Word& w : words) {
      Polynomial src = Polynomial::monomial(pt.map.source(), w);
      Complex want = state_evaluate(source_state, src);
      Complex got = state_evaluate(pt.target_state, apply_context(pt.map, src));
      max_err = std::max(max_err, std::abs(got - want));
    }
    rep.errors.emplace_back(pt.h, max_err);
  }
  rep.ok = true;
  for (std::size_t i = 0; i + 1 < rep.errors.size(); ++i)
    if (rep.errors[i + 1].second > rep.errors[i].second + 1e-12) {
      rep.ok = false;
      rep.failure = "error is not non-increasing along the schedule";
    }
  rep.final_error = rep.errors.back().second;
  if (rep.final_error > final_tol) {
    rep.ok = false;
    rep.failure = "final error " + std::to_string(rep.final_error) +
                  " exceeds " + std::to_string(final_tol);
  }
  return rep;
}

struct PinRecord {
  Word word;
  Complex value;
  std::string context_label;
};

struct PcpReport {
  std::vector<PinRecord> pins;
  FeasibilityVerdict verdict;
  int degree = 0;
  int basis_size = 0;
  int extra_constraint_count = 0;
};

// The feasibility question behind a context family: pin every target moment
// any context can see (images of source words up to degree 2d, evaluated in
// that context's source state) and ask whether one PSD moment matrix serves
// them all. Distinct contexts pinning one word to different values is
// already a refutation and is reported as such, not thrown.
inline PcpReport pcp_check(
    const PresentationPtr& target,
    const std::vector<std::pair<ContextMap, StateSpec>>& contexts, int d,
    const SolveOptions& opt = {},
    const std::vector<std::pair<Word, Complex>>& direct_pins = {}) {
  PcpReport rep;
  rep.degree = d;

  struct PinSource {
    Complex value;
    std::string label;
  };
  std::map<Word, PinSource, WordOrder> pins;
  std::vector<std::pair<Polynomial, Complex>> affine;  // nf(f(w)) = value
  std::vector<std::string> affine_labels;

  auto add_pin = [&](const Word& w, Complex value,
                     const std::string& label) -> std::optional<std::string> {
    auto [it, inserted] = pins.try_emplace(w, PinSource{value, label});
    if (!inserted && std::abs(it->second.value - value) > 1e-7)
      return "contexts '" + it->second.label + "' and '" + label +
             "' pin moment of '" + target->display(w) +
             "' to different values";
    return std::nullopt;
  };

  for (const auto& [w, v] : direct_pins)
    if (auto clash = add_pin(w, v, "pin")) {
      rep.verdict.outcome = FeasibilityVerdict::Outcome::infeasible_certified;
      rep.verdict.reason = *clash;
      return rep;
    }

  for (const auto& [f, state] : contexts) {
    if (f.target()->hash() != target->hash())
      throw Error("context '" + f.label() +
                  "' does not map into the stated target");
    for (const Word& w : enumerate_basis_words(f.source(), 2 * d)) {
      if (w.empty()) continue;
      Polynomial src = Polynomial::monomial(f.source(), w);
      Complex value = state_evaluate(state, src);
      Polynomial img = apply_context(f, src);
      if (img.terms().empty()) {
        if (std::abs(value) > 1e-9) {
          rep.verdict.outcome =
              FeasibilityVerdict::Outcome::infeasible_certified;
          rep.verdict.reason = "context '" + f.label() + "' maps '" +
                               f.source()->display(w) +
                               "' to zero but its moment is nonzero";
          return rep;
        }
        continue;
      }
      if (img.terms().size() == 1) {
        const auto& [tw, c] = *img.terms().begin();
        if (tw.empty()) {
          if (std::abs(c - value) > 1e-7) {
            rep.verdict.outcome =
                FeasibilityVerdict::Outcome::infeasible_certified;
            rep.verdict.reason = "context '" + f.label() + "' maps '" +
                                 f.source()->display(w) +
                                 "' to a scalar that disagrees with its moment";
            return rep;
          }
          continue;
        }
        if (auto clash = add_pin(tw, value / c, f.label())) {
          rep.verdict.outcome =
              FeasibilityVerdict::Outcome::infeasible_certified;
          rep.verdict.reason = *clash;
          return rep;
        }
        continue;
      }
      affine.emplace_back(img, value);
      affine_labels.push_back(f.label());
    }
  }

  std::vector<std::pair<Word, Complex>> fixed;
  for (const auto& [w, src] : pins) {
    fixed.emplace_back(w, src.value);
    rep.pins.push_back({w, src.value, src.label});
  }
  MomentMatrix m = build_moment_matrix(target, d, fixed);
  for (const auto& [poly, value] : affine) {
    AffineExpr e = detail::expr_from_polynomial(poly, m.fixed);
    e.constant -= value;
    m.extra_constraints.push_back(std::move(e));
  }
  rep.basis_size = int(m.basis.size());
  rep.extra_constraint_count = int(m.extra_constraints.size());
  rep.verdict = feasibility_solve(m, opt);
  return rep;
}

// A ↦ (1/√p) Σ c_a A_a: one mode spread over p replicas. Admissibility
// (Σ|c_a|² = p) is *not* enforced here; verify_homomorphism reports the
// exact residual (Σ|c_a|²/p − 1)·1 when it fails.
inline ContextMap replica_map(const PresentationPtr& source,
                              const PresentationPtr& target,
                              const std::vector<Complex>& c,
                              std::string label = "replica") {
  if (source->algebra_class() != AlgebraClass::boltzmann ||
      source->modes() != 1)
    throw Error("replica map needs a one-mode boltzmann source");
  if (target->algebra_class() != AlgebraClass::boltzmann ||
      target->modes() != int(c.size()))
    throw Error("replica map needs a boltzmann target with one mode per "
                "coefficient");
  int p = int(c.size());
  Polynomial image = Polynomial::zero(target);
  double norm = 1.0 / std::sqrt(double(p));
  for (int a = 0; a < p; ++a)
    image += Polynomial::generator(target, a) * (norm * c[a]);
  std::map<int, Polynomial> given;
  given[0] = image;  // the annihilator; the creator image is its adjoint
  return ContextMap::from_partial(source, target, given, std::move(label));
}

struct FamilyMember {
  ContextMap map;
  StateSpec source_state;
};

// One h of the deformation schedule, with every family member's map rebuilt
// against the h-dependent target.
struct LimitStage {
  double h = 0.0;
  std::vector<ContextMap> maps;  // one per family member
  StateSpec target_state;
};

struct QuantizationOptions {
  int degree = 2;
  int correspondence_degree = 0;  // 0 means 2 * degree
  double exact_tol = 1e-9;
  double limit_final_tol = 5e-3;
  SolveOptions solve;
};

struct QuantizationVerdict {
  bool homomorphism_ok = true;
  bool injectivity_ok = true;
  bool correspondence_ok = true;
  bool generation_ok = true;
  bool pcp_ok = true;
  PcpReport pcp;  // at the last (smallest-h) stage
  std::vector<CorrespondenceReport> correspondence;  // per family member
  std::vector<std::string> notes;

  bool overall() const {
    return homomorphism_ok && injectivity_ok && correspondence_ok &&
           generation_ok && pcp_ok;
  }
};

// The whole battery of Definition-style checks, either against one exact
// target state or along a limit schedule (in which case structural checks
// and the feasibility question are asked at every stage).
inline QuantizationVerdict contextual_quantization_verify(
    const std::vector<FamilyMember>& family, const StateSpec& target_state,
    const std::vector<LimitStage>& stages, const QuantizationOptions& opt) {
  if (family.empty()) throw Error("quantization needs at least one context");
  bool limit_mode = !stages.empty();
  int corr_d = opt.correspondence_degree > 0 ? opt.correspondence_degree
                                             : 2 * opt.degree;

  std::vector<LimitStage> work;
  if (limit_mode) {
    for (const LimitStage& st : stages)
      if (st.maps.size() != family.size())
        throw Error("every schedule stage needs one map per family member");
    work = stages;
  } else {
    LimitStage st;
    for (const FamilyMember& mem : family) st.maps.push_back(mem.map);
    st.target_state = target_state;
    work.push_back(std::move(st));
  }

  QuantizationVerdict v;
  for (const LimitStage& st : work) {
    std::string at =
        limit_mode ? " at h=" + std::to_string(st.h) : std::string();
    std::vector<Polynomial> all_images;
    for (std::size_t i = 0; i < st.maps.size(); ++i) {
      const ContextMap& f = st.maps[i];
      HomomorphismCheck hom = verify_homomorphism(f);
      if (!hom.ok) {
        v.homomorphism_ok = false;
        v.notes.push_back("context '" + f.label() + "'" + at +
                          " violates a source relation: residual " +
                          hom.violations.front().residual.str());
      }
      InjectivityProbe inj = injectivity_probe(f, opt.degree);
      if (!inj.ok) {
        v.injectivity_ok = false;
        v.notes.push_back("context '" + f.label() + "'" + at +
                          " has rank " + std::to_string(inj.rank) + " < " +
                          std::to_string(inj.domain_dimension) +
                          " at degree " + std::to_string(opt.degree));
      }
      for (const Polynomial& img : f.images()) all_images.push_back(img);
    }
    GenerationCheck gen =
        verify_generation(st.maps.front().target(), all_images, opt.degree);
    if (!gen.ok) {
      v.generation_ok = false;
      v.notes.push_back("images span " + std::to_string(gen.span_dimension) +
                        " of " + std::to_string(gen.target_dimension) +
                        " target dimensions" + at);
    }
    std::vector<std::pair<ContextMap, StateSpec>> ctx;
    for (std::size_t i = 0; i < family.size(); ++i)
      ctx.emplace_back(st.maps[i], family[i].source_state);
    v.pcp = pcp_check(st.maps.front().target(), ctx, opt.degree, opt.solve);
    if (!v.pcp.verdict.feasible()) {
      v.pcp_ok = false;
      v.notes.push_back(std::string("moment feasibility ") +
                        v.pcp.verdict.outcome_name() + at +
                        (v.pcp.verdict.reason.empty()
                             ? std::string()
                             : ": " + v.pcp.verdict.reason));
    }
  }

  for (std::size_t i = 0; i < family.size(); ++i) {
    CorrespondenceReport rep;
    if (limit_mode) {
      std::vector<LimitPoint> pts;
      for (const LimitStage& st : work)
        pts.push_back(LimitPoint{st.h, st.maps[i], st.target_state});
      rep = verify_state_correspondence_limit(
          pts, family[i].source_state, corr_d, opt.limit_final_tol);
    } else {
      rep = verify_state_correspondence_exact(family[i].map,
                                              family[i].source_state,
                                              target_state, corr_d,
                                              opt.exact_tol);
    }
    if (!rep.ok) {
      v.correspondence_ok = false;
      v.notes.push_back("context '" + family[i].map.label() +
                        "' correspondence: " + rep.failure);
    }
    v.correspondence.push_back(std::move(rep));
  }
  return v;
}

}  // namespace ncq
