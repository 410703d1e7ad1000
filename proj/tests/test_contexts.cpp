#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "ncq/contexts.hpp"
#include "ncq/parse.hpp"

using namespace ncq;

namespace {

// random coefficient vector with sum |c_a|^2 = p (an admissible replica)
std::vector<Complex> random_admissible(std::mt19937_64& rng, int p) {
  std::normal_distribution<double> g;
  std::vector<Complex> c(p);
  double norm2 = 0.0;
  for (Complex& v : c) {
    v = Complex(g(rng), g(rng));
    norm2 += std::norm(v);
  }
  double scale = std::sqrt(double(p) / norm2);
  for (Complex& v : c) v *= scale;
  return c;
}

Polynomial random_poly(std::mt19937_64& rng, const PresentationPtr& p,
                       int deg) {
  std::uniform_int_distribution<int> len_d(0, deg);
  std::uniform_int_distribution<int> gen_d(0, p->size() - 1);
  std::uniform_real_distribution<double> coeff_d(-2.0, 2.0);
  Polynomial x = Polynomial::zero(p);
  for (int t = 0; t < 3; ++t) {
    Word w(len_d(rng));
    for (int& g : w) g = gen_d(rng);
    x.add_term(w, Complex(coeff_d(rng), coeff_d(rng)));
  }
  return x;
}

ContextMap coordinate_context(const PresentationPtr& comm,
                              const PresentationPtr& ccr, int gen,
                              const std::string& label) {
  std::map<int, Polynomial> given;
  given[0] = Polynomial::generator(ccr, gen);
  return ContextMap::from_partial(comm, ccr, given, label);
}

}  // namespace

TEST_CASE("context maps respect adjoints by construction") {
  auto boltz1 = Presentation::boltzmann(1);
  auto boltz2 = Presentation::boltzmann(2);

  // giving only the annihilator image determines the creator image
  std::map<int, Polynomial> given;
  given[0] = Polynomial::generator(boltz2, 0);
  ContextMap f = ContextMap::from_partial(boltz1, boltz2, given, "embed");
  CHECK(f.image(1).distance(Polynomial::generator(boltz2, 2)) == 0.0);

  // an adjoint-inconsistent pair of images is rejected
  std::vector<Polynomial> bad = {Polynomial::generator(boltz2, 0),
                                 Polynomial::generator(boltz2, 3)};
  CHECK_THROWS_WITH_AS(ContextMap(boltz1, boltz2, bad, "bad"),
                       doctest::Contains("adjoint"), Error);

  std::map<int, Polynomial> empty;
  CHECK_THROWS_WITH_AS(
      ContextMap::from_partial(boltz1, boltz2, empty, "none"),
      doctest::Contains("missing"), Error);
}

TEST_CASE("apply_context substitutes, multiplies, reduces") {
  auto boltz1 = Presentation::boltzmann(1);
  auto boltz2 = Presentation::boltzmann(2);
  ContextMap delta = replica_map(boltz1, boltz2, {Complex(1), Complex(1)});

  // Delta(A) = (A1 + A2) / sqrt(2)
  Polynomial img = apply_context(delta, Polynomial::generator(boltz1, 0));
  Polynomial want =
      (Polynomial::generator(boltz2, 0) + Polynomial::generator(boltz2, 1)) *
      Complex(1.0 / std::sqrt(2.0));
  CHECK(img.distance(want) < 1e-15);

  // Delta(A A†) reduces to 1 for the admissible coefficients
  Polynomial aa = Polynomial::generator(boltz1, 0) *
                  Polynomial::generator(boltz1, 1);
  Polynomial mapped = apply_context(delta, aa);
  CHECK(mapped.distance(Polynomial::scalar(boltz2, 1.0)) < 1e-12);

  // identity substitution is the identity
  std::vector<Polynomial> id_images;
  for (int g = 0; g < boltz2->size(); ++g)
    id_images.push_back(Polynomial::generator(boltz2, g));
  ContextMap id(boltz2, boltz2, id_images, "id");
  std::mt19937_64 rng(2718);
  for (int t = 0; t < 50; ++t) {
    Polynomial x = random_poly(rng, boltz2, 3);
    CHECK(apply_context(id, x).distance(normal_form(x)) < 1e-12);
  }
}

TEST_CASE("apply_context is a *-homomorphism on random input") {
  auto boltz1 = Presentation::boltzmann(1);
  auto boltz3 = Presentation::boltzmann(3);
  std::mt19937_64 rng(1618);
  ContextMap delta = replica_map(boltz1, boltz3, random_admissible(rng, 3));
  for (int t = 0; t < 200; ++t) {
    Polynomial x = random_poly(rng, boltz1, 3);
    Polynomial y = random_poly(rng, boltz1, 3);
    // adjoint compatibility
    Polynomial lhs = apply_context(delta, adjoint(x));
    Polynomial rhs = normal_form(adjoint(apply_context(delta, x)));
    CHECK(lhs.distance(rhs) < 1e-10);
    // multiplicativity after reduction
    Polynomial prod = apply_context(delta, x * y);
    Polynomial split =
        normal_form(apply_context(delta, x) * apply_context(delta, y));
    CHECK(prod.distance(split) < 1e-9);
  }
}

TEST_CASE("homomorphism verification and the replica residual") {
  auto boltz1 = Presentation::boltzmann(1);
  std::mt19937_64 rng(5050);
  for (int p : {2, 3, 5}) {
    auto target = Presentation::boltzmann(p);
    for (int t = 0; t < 20; ++t) {
      ContextMap delta = replica_map(boltz1, target, random_admissible(rng, p));
      HomomorphismCheck check = verify_homomorphism(delta);
      CHECK(check.ok);
    }
  }

  // c = (1, 0) gives sum |c|^2 / p = 1/2, so the A A† -> 1 relation picks up
  // the exact residual -1/2
  auto boltz2 = Presentation::boltzmann(2);
  ContextMap bad = replica_map(boltz1, boltz2, {Complex(1), Complex(0)});
  HomomorphismCheck check = verify_homomorphism(bad);
  REQUIRE_FALSE(check.ok);
  REQUIRE(check.violations.size() >= 1);
  const Polynomial& res = check.violations.front().residual;
  CHECK(res.terms().size() == 1);
  CHECK(std::abs(res.constant_term() - Complex(-0.5)) < 1e-14);
}

TEST_CASE("replica moments match the one-mode space exactly") {
  auto boltz1 = Presentation::boltzmann(1);
  auto boltz3 = Presentation::boltzmann(3);
  std::mt19937_64 rng(90210);
  for (int t = 0; t < 20; ++t) {
    ContextMap delta = replica_map(boltz1, boltz3, random_admissible(rng, 3));
    // every *-word in Delta(A) up to degree 6
    for (int len = 1; len <= 6; ++len) {
      for (int mask = 0; mask < (1 << len); ++mask) {
        Word w(len);
        for (int i = 0; i < len; ++i) w[i] = (mask >> i) & 1;
        Polynomial src = Polynomial::monomial(boltz1, w);
        Complex one_mode = fock_evaluate(src);
        Complex replicated = fock_evaluate(apply_context(delta, src));
        CHECK(std::abs(one_mode - replicated) < 1e-10);
      }
    }
  }
}

TEST_CASE("choosing c = sqrt(p) e_i collapses the replica to one embedding") {
  auto boltz1 = Presentation::boltzmann(1);
  auto boltz3 = Presentation::boltzmann(3);
  for (int i = 0; i < 3; ++i) {
    std::vector<Complex> c(3, Complex(0.0));
    c[i] = std::sqrt(3.0);
    ContextMap delta = replica_map(boltz1, boltz3, c);
    Polynomial img = apply_context(delta, Polynomial::generator(boltz1, 0));
    CHECK(img.distance(Polynomial::generator(boltz3, i)) < 1e-15);
  }
}

TEST_CASE("injectivity probe at truncated degree") {
  auto comm = Presentation::commutative(1);
  auto ccr = Presentation::ccr(1, 1.0);

  InjectivityProbe good = injectivity_probe(
      coordinate_context(comm, ccr, 0, "q"), 3);
  CHECK(good.ok);
  CHECK(good.rank == good.domain_dimension);

  std::vector<Polynomial> zero = {Polynomial::zero(ccr)};
  InjectivityProbe trivial =
      injectivity_probe(ContextMap(comm, ccr, zero, "zero"), 1);
  CHECK_FALSE(trivial.ok);
  CHECK(trivial.rank == 1);  // only the unit survives

  auto boltz1 = Presentation::boltzmann(1);
  auto boltz2 = Presentation::boltzmann(2);
  std::mt19937_64 rng(11);
  ContextMap delta = replica_map(boltz1, boltz2, random_admissible(rng, 2));
  CHECK(injectivity_probe(delta, 2).ok);
}

TEST_CASE("generation check counts the reachable span") {
  auto ccr2 = Presentation::ccr(2, 0.5);
  std::vector<Polynomial> all = {
      Polynomial::generator(ccr2, 0), Polynomial::generator(ccr2, 1),
      Polynomial::generator(ccr2, 2), Polynomial::generator(ccr2, 3)};
  GenerationCheck full = verify_generation(ccr2, all, 2);
  CHECK(full.ok);
  CHECK(full.span_dimension == full.target_dimension);

  auto ccr1 = Presentation::ccr(1, 0.5);
  GenerationCheck partial =
      verify_generation(ccr1, {Polynomial::generator(ccr1, 0)}, 2);
  CHECK_FALSE(partial.ok);  // powers of q never reach p

  auto boltz3 = Presentation::boltzmann(3);
  std::vector<Polynomial> annihilators = {Polynomial::generator(boltz3, 0),
                                          Polynomial::generator(boltz3, 1),
                                          Polynomial::generator(boltz3, 2)};
  // adjoints are included automatically, so the creators come along
  CHECK(verify_generation(boltz3, annihilators, 2).ok);
}

TEST_CASE("context compatibility and the commutator witness") {
  auto comm = Presentation::commutative(1);
  auto ccr2 = Presentation::ccr(2, 0.7);

  CompatibilityCheck clash = check_context_compatibility(
      coordinate_context(comm, ccr2, 0, "q1"),
      coordinate_context(comm, ccr2, 2, "p1"), 2);
  REQUIRE_FALSE(clash.compatible);
  // witness is nf(q1 p1 - p1 q1) = i h
  CHECK(clash.witness.terms().size() == 1);
  CHECK(std::abs(clash.witness.constant_term() - Complex(0.0, 0.7)) < 1e-14);

  CompatibilityCheck fine = check_context_compatibility(
      coordinate_context(comm, ccr2, 0, "q1"),
      coordinate_context(comm, ccr2, 1, "q2"), 2);
  CHECK(fine.compatible);

  auto boltz1 = Presentation::boltzmann(1);
  auto boltz2 = Presentation::boltzmann(2);
  ContextMap d0 = replica_map(boltz1, boltz2,
                              {Complex(std::sqrt(2.0)), Complex(0)});
  ContextMap d1 = replica_map(boltz1, boltz2,
                              {Complex(0), Complex(std::sqrt(2.0))});
  CHECK_FALSE(check_context_compatibility(d0, d1, 2).compatible);
}

TEST_CASE("exact state correspondence: embedded mode sees one-mode moments") {
  auto boltz1 = Presentation::boltzmann(1);
  auto boltz2 = Presentation::boltzmann(2);
  std::map<int, Polynomial> given;
  given[0] = Polynomial::generator(boltz2, 1);
  ContextMap f = ContextMap::from_partial(boltz1, boltz2, given, "mode 2");
  CorrespondenceReport rep = verify_state_correspondence_exact(
      f, StateSpec::fock(), StateSpec::fock(), 6);
  CHECK(rep.ok);
  CHECK(rep.final_error < 1e-12);
}

TEST_CASE("limit correspondence follows the deformation schedule") {
  auto comm = Presentation::commutative(1);
  StateSpec classical = StateSpec::gaussian(1.0);  // variance 1/beta, beta=1
  std::vector<double> schedule = {1.0, 0.3, 0.1, 0.03, 0.01};
  std::vector<LimitPoint> points;
  for (double h : schedule) {
    auto ccr = Presentation::ccr(1, h);
    points.push_back(LimitPoint{h, coordinate_context(comm, ccr, 0, "q"),
                                StateSpec::gibbs_oscillator(1.0, h)});
  }
  CorrespondenceReport rep =
      verify_state_correspondence_limit(points, classical, 4, 5e-3);
  CHECK(rep.ok);
  REQUIRE(rep.errors.size() == 5);
  for (std::size_t i = 0; i + 1 < rep.errors.size(); ++i)
    CHECK(rep.errors[i + 1].second <= rep.errors[i].second);
  CHECK(rep.final_error <= 5e-3);

  // a hopeless tolerance is reported, not hidden
  CorrespondenceReport strict =
      verify_state_correspondence_limit(points, classical, 4, 1e-12);
  CHECK_FALSE(strict.ok);

  // schedule validation
  std::vector<LimitPoint> two(points.begin(), points.begin() + 2);
  CHECK_THROWS_WITH_AS(
      verify_state_correspondence_limit(two, classical, 4, 1e-2),
      doctest::Contains("3 points"), Error);
  std::vector<LimitPoint> increasing = {points[2], points[1], points[0]};
  CHECK_THROWS_WITH_AS(
      verify_state_correspondence_limit(increasing, classical, 4, 1e-2),
      doctest::Contains("decrease"), Error);
}

TEST_CASE("pcp over coordinate contexts matches the uncertainty relation") {
  auto comm = Presentation::commutative(1);
  auto ccr2 = Presentation::ccr(2, 1.0);
  double beta = 1.0, h = 1.0;
  double matched = (h / 2.0) / std::tanh(beta * h / 2.0);  // the Gibbs variance

  auto family_at = [&](double variance) {
    StateSpec gauss = StateSpec::gaussian(std::sqrt(variance));
    std::vector<std::pair<ContextMap, StateSpec>> ctx;
    const char* names[4] = {"q1", "q2", "p1", "p2"};
    for (int g = 0; g < 4; ++g)
      ctx.emplace_back(coordinate_context(comm, ccr2, g, names[g]), gauss);
    return ctx;
  };

  PcpReport good = pcp_check(ccr2, family_at(matched), 2);
  CHECK(good.verdict.feasible());
  CHECK(good.basis_size == 15);
  CHECK_FALSE(good.pins.empty());

  // variance far below the uncertainty floor h/2 cannot be unified
  PcpReport bad = pcp_check(ccr2, family_at(0.4), 2);
  CHECK_FALSE(bad.verdict.feasible());
}

TEST_CASE("pcp detects cross-context pin clashes without solving") {
  auto comm = Presentation::commutative(1);
  auto ccr1 = Presentation::ccr(1, 1.0);
  std::vector<std::pair<ContextMap, StateSpec>> ctx = {
      {coordinate_context(comm, ccr1, 0, "first"), StateSpec::gaussian(1.0)},
      {coordinate_context(comm, ccr1, 0, "second"), StateSpec::gaussian(2.0)}};
  PcpReport rep = pcp_check(ccr1, ctx, 2);
  CHECK(rep.verdict.outcome ==
        FeasibilityVerdict::Outcome::infeasible_certified);
  CHECK(rep.verdict.reason.find("different values") != std::string::npos);
  CHECK(rep.verdict.reason.find("first") != std::string::npos);
  CHECK(rep.verdict.reason.find("second") != std::string::npos);
}

TEST_CASE("pcp two-opinion contexts agree with the density solver") {
  auto pauli = parse_presentation(
      "class custom\n"
      "gen z; gen x\n"
      "rule z z -> 1\n"
      "rule x x -> 1\n"
      "rule x z -> -1 * z x\n");
  auto comm = Presentation::commutative(1);

  auto opinion_table = [&](double r) {
    TermMap t;
    t[{}] = 1.0;
    t[{0}] = r;        // mean of a ±1 variable
    t[{0, 0}] = 1.0;   // squares to one
    return StateSpec::moment_table(t);
  };
  ComplexMatrix hadamard(2, 2);
  double s = 1.0 / std::sqrt(2.0);
  hadamard(0, 0) = s;
  hadamard(0, 1) = s;
  hadamard(1, 0) = s;
  hadamard(1, 1) = -s;

  std::mt19937_64 rng(321);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  int checked = 0;
  while (checked < 25) {
    double rz = d(rng), rx = d(rng);
    if (std::abs(rz * rz + rx * rx - 1.0) < 0.05) continue;
    ++checked;
    std::map<int, Polynomial> to_z, to_x;
    to_z[0] = Polynomial::generator(pauli, 0);
    to_x[0] = Polynomial::generator(pauli, 1);
    std::vector<std::pair<ContextMap, StateSpec>> ctx = {
        {ContextMap::from_partial(comm, pauli, to_z, "diagonal opinion"),
         opinion_table(rz)},
        {ContextMap::from_partial(comm, pauli, to_x, "rotated opinion"),
         opinion_table(rx)}};
    PcpReport pcp = pcp_check(pauli, ctx, 1);

    std::vector<std::pair<ComplexMatrix, std::vector<double>>> marg = {
        {ComplexMatrix::identity(2), {(1 + rz) / 2, (1 - rz) / 2}},
        {hadamard, {(1 + rx) / 2, (1 - rx) / 2}}};
    FeasibilityVerdict density = density_marginal_feasible(2, marg);
    CHECK(pcp.verdict.feasible() == density.feasible());
  }
}

TEST_CASE("full quantization verdict, exact mode") {
  auto boltz1 = Presentation::boltzmann(1);
  auto boltz2 = Presentation::boltzmann(2);
  std::vector<FamilyMember> family;
  for (int i = 0; i < 2; ++i) {
    std::map<int, Polynomial> given;
    given[0] = Polynomial::generator(boltz2, i);
    family.push_back(FamilyMember{
        ContextMap::from_partial(boltz1, boltz2, given,
                                 "mode " + std::to_string(i + 1)),
        StateSpec::fock()});
  }
  QuantizationOptions opt;
  opt.degree = 2;
  QuantizationVerdict v = contextual_quantization_verify(
      family, StateSpec::fock(), {}, opt);
  CHECK(v.overall());
  CHECK(v.pcp.verdict.feasible());
  CHECK(v.notes.empty());

  // dropping a context breaks generation but nothing else
  std::vector<FamilyMember> partial(family.begin(), family.begin() + 1);
  QuantizationVerdict broken = contextual_quantization_verify(
      partial, StateSpec::fock(), {}, opt);
  CHECK_FALSE(broken.overall());
  CHECK(broken.homomorphism_ok);
  CHECK(broken.injectivity_ok);
  CHECK(broken.correspondence_ok);
  CHECK_FALSE(broken.generation_ok);
}

TEST_CASE("full quantization verdict, limit mode") {
  auto comm = Presentation::commutative(1);
  StateSpec classical = StateSpec::gaussian(1.0);
  std::vector<FamilyMember> family;
  {
    auto ccr_ref = Presentation::ccr(1, 1.0);
    family.push_back(FamilyMember{coordinate_context(comm, ccr_ref, 0, "q"),
                                  classical});
    family.push_back(FamilyMember{coordinate_context(comm, ccr_ref, 1, "p"),
                                  classical});
  }
  std::vector<LimitStage> stages;
  for (double h : {1.0, 0.3, 0.1, 0.03, 0.01}) {
    auto ccr = Presentation::ccr(1, h);
    LimitStage st;
    st.h = h;
    st.maps.push_back(coordinate_context(comm, ccr, 0, "q"));
    st.maps.push_back(coordinate_context(comm, ccr, 1, "p"));
    st.target_state = StateSpec::gibbs_oscillator(1.0, h);
    stages.push_back(std::move(st));
  }
  QuantizationOptions opt;
  opt.degree = 2;
  QuantizationVerdict v =
      contextual_quantization_verify(family, StateSpec(), stages, opt);
  CHECK(v.overall());
  REQUIRE(v.correspondence.size() == 2);
  CHECK(v.correspondence[0].errors.size() == 5);
  CHECK(v.correspondence[0].final_error <= 5e-3);
}

TEST_CASE("noncommutative target witnessed through free fields") {
  // commutative source, contexts X -> X_i = A_i + A_i' into two modes: the
  // images generate, moments are the matching counts, and the two contexts
  // fail to commute, so the quantization is genuinely noncommutative
  auto comm = Presentation::commutative(1);
  auto boltz2 = Presentation::boltzmann(2);
  TermMap semicircle;
  semicircle[{}] = 1.0;
  for (int k = 1; k <= 4; ++k) {
    std::vector<int> labels(k, 0);
    semicircle[Word(k, 0)] =
        double(count_noncrossing_pair_matchings(labels));
  }
  StateSpec source = StateSpec::moment_table(semicircle);

  std::vector<FamilyMember> family;
  for (int i = 0; i < 2; ++i) {
    std::map<int, Polynomial> given;
    given[0] = Polynomial::generator(boltz2, i) +
               Polynomial::generator(boltz2, i + 2);
    family.push_back(FamilyMember{
        ContextMap::from_partial(comm, boltz2, given,
                                 "field " + std::to_string(i + 1)),
        source});
  }
  QuantizationOptions opt;
  opt.degree = 2;
  opt.correspondence_degree = 4;

  // the family is consistent: homomorphism, injectivity, correspondence
  // against the vacuum, and feasibility all pass
  QuantizationVerdict v = contextual_quantization_verify(
      family, StateSpec::fock(), {}, opt);
  CHECK(v.homomorphism_ok);
  CHECK(v.injectivity_ok);
  CHECK(v.correspondence_ok);
  CHECK(v.pcp_ok);
  // the two field contexts do not commute with each other
  CHECK_FALSE(check_context_compatibility(family[0].map, family[1].map, 2)
                  .compatible);
}
