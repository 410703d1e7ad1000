#include <string>
#include <vector>

#include "doctest.h"
#include "ncq/jobs.hpp"

using namespace ncq;
using doctest::Approx;

namespace {

Json parse(const char* text) { return Json::parse(text); }

RunResult run(const Json& config, Overrides ov = {}) {
  return run_job(config, ".", ov);
}

// doctest's Contains works on captured strings; this keeps the call sites
// short when the interesting part is the thrown message.
void check_throws_with(const Json& config, const std::string& needle) {
  try {
    run(config);
    FAIL("expected an Error for ", config.dump());
  } catch (const Error& e) {
    CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos,
                  "message '", e.what(), "' lacks '", needle, "'");
  }
}

}  // namespace

TEST_CASE("moments job fills defaults and echoes unknown keys") {
  Json cfg = parse(R"({
    "job": "moments",
    "presentation": {"preset": "boltzmann", "modes": 1},
    "state": {"kind": "fock"},
    "banana": 3
  })");
  RunResult r = run(cfg);
  CHECK(r.exit_code == 0);
  CHECK(r.report["tool"]["name"] == "ncq");
  CHECK(r.report["tool"]["version"] == std::string(kVersion));
  CHECK(r.report["job"]["degree"] == 2);
  CHECK(r.report["job"]["banana"] == 3);
  REQUIRE(r.report["warnings"].size() == 1);
  CHECK(std::string(r.report["warnings"][0]).find("unknown key 'banana'") !=
        std::string::npos);
  // degree-2 basis of one Boltzmann mode: 1, A, A', A A, A' A, A' A'
  CHECK(r.report["results"]["entries"].size() == 6);
  // the vacuum kills every nonempty normal word
  for (const auto& e : r.report["results"]["entries"]) {
    double expect = e["expression"] == "1" ? 1.0 : 0.0;
    CHECK(double(e["value"][0]) == Approx(expect));
    CHECK(double(e["value"][1]) == Approx(0.0));
  }
}

TEST_CASE("moments job reports gibbs diagnostics and expression values") {
  Json cfg = parse(R"({
    "job": "moments",
    "presentation": {"preset": "ccr", "modes": 1, "h": 0.5},
    "state": {"kind": "gibbs_oscillator", "beta": 2.0, "h": 0.5},
    "expressions": ["q^2", "q p - p q"]
  })");
  RunResult r = run(cfg);
  CHECK(r.exit_code == 0);
  CHECK(r.report["results"].contains("diagnostics"));
  CHECK(int(r.report["results"]["diagnostics"]["truncation"]) > 0);
  // <q^2> = (h/2) coth(beta h / 2)
  double expect = 0.25 / std::tanh(0.5);
  CHECK(double(r.report["results"]["entries"][0]["value"][0]) ==
        Approx(expect).epsilon(1e-10));
  // [q, p] = ih
  CHECK(double(r.report["results"]["entries"][1]["value"][1]) ==
        Approx(0.5).epsilon(1e-12));
}

TEST_CASE("schema violations name the JSON path") {
  check_throws_with(parse(R"({"job": "nonsense"})"),
                    "$.job: unknown job kind");
  check_throws_with(parse(R"({"job": "moments"})"),
                    "$.presentation: required key is missing");
  check_throws_with(
      parse(R"({"job": "moments", "presentation": {}, "state": {"kind": "fock"}})"),
      "$.presentation: needs one of");
  check_throws_with(
      parse(R"({"job": "moments",
                "presentation": {"preset": "weyl"},
                "state": {"kind": "fock"}})"),
      "$.presentation.preset: unknown preset 'weyl'");
  check_throws_with(
      parse(R"({"job": "moments",
                "presentation": {"preset": "boltzmann"},
                "state": {"kind": "thermal"}})"),
      "$.state.kind: unknown state kind");
  check_throws_with(
      parse(R"({"job": "moments",
                "presentation": {"preset": "boltzmann"},
                "state": {"kind": "fock"},
                "expressions": ["A + B"]})"),
      "$.expressions[0]:");
  check_throws_with(
      parse(R"({"job": "pcp",
                "presentation": {"preset": "boltzmann"},
                "pins": [{"word": "A + A'", "value": 0}]})"),
      "$.pins[0].word");
  check_throws_with(
      parse(R"({"job": "twoslit",
                "marginals": [{"basis": "fourier", "probabilities": [1, 0]}]})"),
      "$.marginals[0].basis: unknown basis");
  check_throws_with(parse(R"({"job": "wigner", "N": 20})"),
                    "$.seed: stochastic jobs need an explicit seed");
  check_throws_with(parse(R"({"job": "sweep"})"), "$.seed");
  check_throws_with(
      parse(R"({"job": "algebra_check",
                "presentation": {"preset": "boltzmann"}})"),
      "$.seed");
  check_throws_with(
      parse(R"({"job": "replica", "N": 20, "replicas": 2,
                "coefficients": [1, 1], "seed": 5,
                "patterns": [["gamma"]]})"),
      "$.patterns[0][0]");
}

TEST_CASE("moment table words must be plain unit-coefficient words") {
  Json base = parse(R"({
    "job": "moments",
    "presentation": {"preset": "commutative", "generators": 1},
    "state": {"kind": "moment_table",
              "moments": [{"word": "1", "value": 1},
                          {"word": "x", "value": 0.5}]},
    "expressions": ["x"]
  })");
  RunResult ok = run(base);
  CHECK(double(ok.report["results"]["entries"][0]["value"][0]) ==
        Approx(0.5));

  Json multi = base;
  multi["state"]["moments"][1]["word"] = "x + x^2";
  check_throws_with(multi, "is not a single word");

  Json scaled = base;
  scaled["state"]["moments"][1]["word"] = "2 x";
  check_throws_with(scaled, "must carry coefficient 1");

  Json dup = base;
  dup["state"]["moments"].push_back(parse(R"({"word": "x", "value": 0.5})"));
  check_throws_with(dup, "duplicate entry");
}

TEST_CASE("reports round-trip through their embedded config") {
  Json cfg = parse(R"({
    "job": "pcp",
    "presentation": {"text": "class custom\ngen a adj a*\nrule a a* -> a* a - 1\n"},
    "degree": 1,
    "pins": [{"word": "a* a", "value": 0}],
    "mystery": {"nested": true}
  })");
  RunResult first = run(cfg);
  CHECK(first.exit_code == 1);
  CHECK(first.report["results"]["verdict"]["outcome"] ==
        "InfeasibleCertified");
  CHECK(int(first.report["results"]["verdict"]["iterations"]) == 0);
  CHECK(first.report["warnings"].size() == 1);

  RunResult second = run(first.report["job"]);
  CHECK(first.report.dump() == second.report.dump());

  // and a stochastic job: identical bytes under the same seed
  Json sweep = parse(R"({"job": "sweep", "Ns": [16, 32], "kmax": 2,
                         "trials": 8, "seed": 21})");
  RunResult s1 = run(sweep);
  RunResult s2 = run(s1.report["job"]);
  CHECK(s1.report.dump() == s2.report.dump());
  CHECK(s1.artifact == s2.artifact);

  Json other = sweep;
  other["seed"] = 22;
  CHECK(run(other).artifact != s1.artifact);
}

TEST_CASE("overrides slot into the resolved config") {
  Json cfg = parse(R"({"job": "sweep", "Ns": [16], "kmax": 2, "trials": 8})");
  Overrides ov;
  ov.seed = 9;
  ov.output = "table.csv";
  RunResult r = run(cfg, ov);
  CHECK(std::uint64_t(r.report["job"]["seed"]) == 9);
  CHECK(r.report["job"]["output"] == "table.csv");
  CHECK(r.artifact_path == "table.csv");
  CHECK(r.artifact.rfind("N,k,mean,stderr,prediction,abs_error\n", 0) == 0);

  Json pcp = parse(R"({
    "job": "pcp",
    "presentation": {"preset": "boltzmann"},
    "pins": [{"word": "A' A", "value": 0.25}]
  })");
  Overrides deg;
  deg.degree = 3;
  deg.tol = 1e-7;
  RunResult p = run(pcp, deg);
  CHECK(int(p.report["job"]["degree"]) == 3);
  CHECK(double(p.report["job"]["tolerance"]) == Approx(1e-7));
  CHECK(int(p.report["results"]["degree"]) == 3);
}

TEST_CASE("quantize job verifies an exact Boltzmann embedding") {
  Json cfg = parse(R"({
    "job": "quantize",
    "source": {"presentation": {"preset": "boltzmann", "modes": 1},
               "state": {"kind": "fock"}},
    "target": {"presentation": {"preset": "boltzmann", "modes": 2},
               "state": {"kind": "fock"}},
    "contexts": [{"label": "left",  "images": {"A": "A1"}},
                 {"label": "right", "images": {"A": "A2"}}]
  })");
  RunResult r = run(cfg);
  CHECK(r.exit_code == 0);
  CHECK(bool(r.report["results"]["overall"]));
  CHECK(r.report["results"]["mode"] == "exact");
  REQUIRE(r.report["results"]["correspondence"].size() == 2);
  CHECK(r.report["results"]["correspondence"][0]["context"] == "left");
  CHECK(double(r.report["results"]["correspondence"][0]["final_error"]) <=
        1e-12);
  CHECK(r.report["results"]["pcp"]["verdict"]["outcome"] == "Feasible");

  // a broken image cannot pass the homomorphism check
  Json broken = cfg;
  broken["contexts"][0]["images"]["A"] = "A1 + A2";
  RunResult b = run(broken);
  CHECK(b.exit_code == 1);
  CHECK_FALSE(bool(b.report["results"]["overall"]));
}

TEST_CASE("quantize job runs a deformation schedule") {
  Json cfg = parse(R"({
    "job": "quantize",
    "mode": "limit",
    "source": {"presentation": {"preset": "commutative", "generators": 1},
               "state": {"kind": "gaussian", "sigma": 1.0}},
    "target": {"presentation": {"preset": "ccr", "modes": 1},
               "state": {"kind": "gibbs_oscillator", "beta": 1.0}},
    "contexts": [{"label": "position", "images": {"x": "q"}},
                 {"label": "momentum", "images": {"x": "p"}}],
    "schedule": [0.5, 0.1, 0.02]
  })");
  RunResult r = run(cfg);
  CHECK(r.exit_code == 0);
  const Json& corr = r.report["results"]["correspondence"][0];
  REQUIRE(corr["errors"].size() == 3);
  // correspondence errors shrink along the schedule
  CHECK(double(corr["errors"][2][1]) < double(corr["errors"][0][1]));

  // a fixed h on the target clashes with limit mode
  Json clash = cfg;
  clash["target"]["presentation"]["h"] = 0.5;
  check_throws_with(clash, "$.target.presentation.h");
  Json clash2 = cfg;
  clash2["target"]["state"]["h"] = 0.5;
  check_throws_with(clash2, "$.target.state.h");
  Json wrong = cfg;
  wrong["target"]["presentation"] = parse(R"({"preset": "boltzmann"})");
  check_throws_with(wrong, "$.target.presentation: a limit schedule needs");
}

TEST_CASE("twoslit job returns witnesses exactly when feasible") {
  Json feasible = parse(R"({
    "job": "twoslit",
    "dimension": 2,
    "marginals": [{"basis": "identity", "probabilities": [1.0, 0.0]},
                  {"basis": "hadamard", "probabilities": [0.5, 0.5]}]
  })");
  RunResult f = run(feasible);
  CHECK(f.exit_code == 0);
  REQUIRE(f.report["results"].contains("witness"));
  const Json& rep = f.report["results"]["reproduced_marginals"];
  CHECK(double(rep[0][0]) == Approx(1.0).epsilon(1e-7));
  CHECK(double(rep[0][1]) == Approx(0.0).scale(1.0).epsilon(1e-7));
  CHECK(double(rep[1][0]) == Approx(0.5).epsilon(1e-7));

  Json infeasible = feasible;
  infeasible["marginals"][1]["probabilities"] = parse("[1.0, 0.0]");
  RunResult i = run(infeasible);
  CHECK(i.exit_code == 1);
  CHECK_FALSE(i.report["results"].contains("witness"));

  // dimension can be inferred from the first probability vector
  Json inferred = feasible;
  inferred.erase("dimension");
  CHECK(int(run(inferred).report["job"]["dimension"]) == 2);
}

TEST_CASE("twoslit job accepts explicit basis matrices") {
  // same data as the hadamard preset, spelled out as columns
  Json cfg = parse(R"({
    "job": "twoslit",
    "dimension": 2,
    "marginals": [{"basis": "identity", "probabilities": [0.7, 0.3]},
                  {"basis": [[0.7071067811865476, 0.7071067811865476],
                             [0.7071067811865476, -0.7071067811865476]],
                   "probabilities": [0.5, 0.5]}]
  })");
  RunResult r = run(cfg);
  CHECK(r.exit_code == 0);
  CHECK(r.report["job"]["marginals"][1]["basis"][0][0][0] ==
        Approx(0.7071067811865476));
}

TEST_CASE("replica job checks patterns against symbolic predictions") {
  Json cfg = parse(R"({
    "job": "replica",
    "N": 80,
    "replicas": 2,
    "coefficients": [1.0, 1.0],
    "trials": 24,
    "seed": 5,
    "patterns": [[0, 0], [0, 1], ["delta", "delta"]]
  })");
  RunResult r = run(cfg);
  CHECK(r.exit_code == 0);
  const Json& rows = r.report["results"]["patterns"];
  REQUIRE(rows.size() == 3);
  CHECK(double(rows[0]["prediction"][0]) == Approx(1.0));
  CHECK(double(rows[1]["prediction"][0]) == Approx(0.0).scale(1.0));
  CHECK(double(rows[2]["prediction"][0]) == Approx(1.0));
  for (const auto& row : rows) CHECK(bool(row["pass"]));

  check_throws_with(
      parse(R"({"job": "replica", "N": 20, "replicas": 2,
                "coefficients": [1, 1], "trials": 8, "seed": 1,
                "patterns": []})"),
      "$.patterns: expected a nonempty array");
}

TEST_CASE("algebra_check job flags nothing on the shipped presets") {
  for (const char* text :
       {R"({"job": "algebra_check", "seed": 3,
            "presentation": {"preset": "boltzmann", "modes": 2}})",
        R"({"job": "algebra_check", "seed": 3,
            "presentation": {"preset": "ccr", "modes": 2, "h": 0.7}})",
        R"({"job": "algebra_check", "seed": 3,
            "presentation": {"preset": "commutative", "generators": 2}})"}) {
    RunResult r = run(parse(text));
    CHECK(r.exit_code == 0);
    CHECK(bool(r.report["results"]["pass"]));
    CHECK(int(r.report["job"]["cases"]) == 200);
  }
}

TEST_CASE("property suite is deterministic and covers the custom classes") {
  PresentationPtr pauli = parse_presentation(
      "class custom\n"
      "gen z; gen x\n"
      "rule z z -> 1; rule x x -> 1\n"
      "rule x z -> - z x\n");
  auto a = algebra_property_suite(pauli, 120, 77);
  auto b = algebra_property_suite(pauli, 120, 77);
  REQUIRE(a.size() == 4);  // no zero-deformation twin for custom classes
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].ok());
    CHECK(a[i].max_residual == b[i].max_residual);
  }

  auto ccr = algebra_property_suite(Presentation::ccr(1, 0.3), 120, 77);
  REQUIRE(ccr.size() == 5);
  CHECK(ccr.back().name == "zero deformation commutes");
  for (const auto& p : ccr) CHECK(p.ok());

  std::vector<Complex> gram = {1.0, 0.4, 0.4, 1.0};
  auto gb = algebra_property_suite(Presentation::gram_boltzmann(2, gram),
                                   120, 77);
  for (const auto& p : gb) CHECK(p.ok());
}

TEST_CASE("presentation documents can come from files") {
  Json cfg = parse(R"({
    "job": "pcp",
    "presentation": {"file": "shifted.alg"},
    "degree": 1,
    "pins": [{"word": "a* a", "value": 0}]
  })");
  // write the referenced file next to a fake config dir
  std::string dir = "/tmp/ncq_test_jobs";
  REQUIRE(std::system(("mkdir -p " + dir).c_str()) == 0);
  {
    std::ofstream f(dir + "/shifted.alg");
    f << "class custom\ngen a adj a*\nrule a a* -> a* a - 1\n";
  }
  RunResult r = run_job(cfg, dir, {});
  CHECK(r.exit_code == 1);
  // the echo inlines the file so reports stay reproducible elsewhere
  CHECK_FALSE(r.report["job"]["presentation"].contains("file"));
  std::string text = r.report["job"]["presentation"]["text"];
  CHECK(text.find("rule a a*") != std::string::npos);
  RunResult again = run_job(r.report["job"], "/nonexistent", {});
  CHECK(again.report.dump() == r.report.dump());

  Json missing = cfg;
  missing["presentation"]["file"] = "nope.alg";
  try {
    run_job(missing, dir, {});
    FAIL("expected an Error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("$.presentation.file") !=
          std::string::npos);
  }
}
