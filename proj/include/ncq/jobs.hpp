#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ncq/algebra.hpp"
#include "ncq/contexts.hpp"
#include "ncq/error.hpp"
#include "ncq/moments.hpp"
#include "ncq/parse.hpp"
#include "ncq/random_matrix.hpp"
#include "ncq/states.hpp"
#include "ncq/version.hpp"

// Job layer: JSON configs in, deterministic reports out. A config document
// names a job kind and its inputs; run_job normalizes it (defaults filled,
// file references inlined), dispatches to the engines, and returns a report
// that embeds the normalized config, so re-running a report's "job" field
// reproduces the report byte for byte. Schema problems are reported with the
// JSON path of the offending key; unknown keys are echoed through with a
// warning rather than rejected. Nothing here prints or writes files; the
// command-line tool owns the I/O.

namespace ncq {

using Json = nlohmann::ordered_json;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> degree;
  std::optional<double> tol;
  std::optional<std::string> output;
};

struct RunResult {
  Json report;
  int exit_code = 0;
  std::string summary;        // human-readable lines for stdout
  std::string artifact;       // CSV text for table-producing jobs
  std::string artifact_path;  // where the artifact wants to live ("" = none)
};

namespace jobdetail {

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read file '" + path + "'");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline const Json& require_key(const Json& obj, const char* key,
                               const std::string& path) {
  if (!obj.is_object())
    throw Error(path + ": expected a JSON object");
  auto it = obj.find(key);
  if (it == obj.end())
    throw Error(path + "." + key + ": required key is missing");
  return *it;
}

inline double as_double(const Json& j, const std::string& path) {
  if (!j.is_number()) throw Error(path + ": expected a number");
  return j.get<double>();
}

inline int as_int(const Json& j, const std::string& path) {
  if (!j.is_number_integer() && !j.is_number_unsigned())
    throw Error(path + ": expected an integer");
  return j.get<int>();
}

inline std::string as_string(const Json& j, const std::string& path) {
  if (!j.is_string()) throw Error(path + ": expected a string");
  return j.get<std::string>();
}

inline Complex as_complex(const Json& j, const std::string& path) {
  if (j.is_number()) return Complex(j.get<double>(), 0.0);
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return Complex(j[0].get<double>(), j[1].get<double>());
  throw Error(path + ": expected a real number or a [re, im] pair");
}

inline Json cjson(Complex z) { return Json::array({z.real(), z.imag()}); }

inline double opt_double(const Json& obj, const char* key, double fallback,
                         const std::string& path) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : as_double(*it, path + "." + key);
}

inline int opt_int(const Json& obj, const char* key, int fallback,
                   const std::string& path) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : as_int(*it, path + "." + key);
}

inline std::string opt_string(const Json& obj, const char* key,
                              const std::string& fallback,
                              const std::string& path) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : as_string(*it, path + "." + key);
}

// Copy keys outside the schema into the echo untouched. Re-running the echo
// re-detects the same keys, so warnings survive the round trip too.
inline void echo_unknown(const Json& in, const std::set<std::string>& known,
                         const std::string& path, Json& out,
                         std::vector<std::string>& warnings) {
  if (!in.is_object()) return;
  for (auto it = in.begin(); it != in.end(); ++it) {
    if (known.count(it.key())) continue;
    out[it.key()] = it.value();
    warnings.push_back("unknown key '" + it.key() + "' at " + path);
  }
}

inline std::uint64_t required_seed(const Json& in, const Overrides& ov,
                                   const std::string& path) {
  if (ov.seed) return *ov.seed;
  auto it = in.find("seed");
  if (it == in.end())
    throw Error(path + ".seed: stochastic jobs need an explicit seed");
  if (it->is_number_unsigned()) return it->get<std::uint64_t>();
  if (it->is_number_integer() && it->get<std::int64_t>() >= 0)
    return it->get<std::uint64_t>();
  throw Error(path + ".seed: expected a nonnegative integer");
}

// Parseable spelling of a word: raw generator names joined by spaces. The
// pretty display form renders adjoints with a dagger, which the expression
// grammar does not read back, so echoes that round-trip use this instead.
inline std::string spell(const PresentationPtr& pres, const Word& w) {
  if (w.empty()) return "1";
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) out += ' ';
    out += pres->generator(w[i]).name;
  }
  return out;
}

// Parse a word spelled as an expression ("a* a", "q^2", "1"). It must come
// out as a single monomial with unit coefficient.
inline Word parse_word(const std::string& text, const PresentationPtr& pres,
                       const std::string& path) {
  Polynomial p = parse_expression(text.empty() ? "1" : text, pres);
  if (p.terms().size() != 1)
    throw Error(path + ": '" + text + "' is not a single word");
  const auto& [w, c] = *p.terms().begin();
  if (std::abs(c - Complex(1.0, 0.0)) > 1e-12)
    throw Error(path + ": '" + text + "' must carry coefficient 1");
  return w;
}

}  // namespace jobdetail

// ---------------------------------------------------------------------------
// Document builders: presentation, state, context.

struct PresentationDoc {
  PresentationPtr pres;
  std::string preset;  // empty when given as text
  int modes = 1;
  bool has_h = false;
  double h = 1.0;
};

// defer_h marks the target of a limit schedule: the ccr preset must then
// leave "h" unset, and the returned presentation is a placeholder built at
// h = 1 while the schedule stages rebuild it per point.
inline PresentationDoc presentation_from_json(const Json& doc,
                                              const std::string& base_dir,
                                              const std::string& path,
                                              Json& resolved,
                                              std::vector<std::string>& warnings,
                                              bool defer_h = false) {
  using namespace jobdetail;
  if (!doc.is_object()) throw Error(path + ": expected a JSON object");
  PresentationDoc out;

  if (doc.contains("preset")) {
    out.preset = as_string(doc.at("preset"), path + ".preset");
    resolved["preset"] = out.preset;
    std::set<std::string> known = {"preset"};
    if (out.preset == "boltzmann") {
      out.modes = opt_int(doc, "modes", 1, path);
      out.pres = Presentation::boltzmann(out.modes);
      resolved["modes"] = out.modes;
      known.insert("modes");
    } else if (out.preset == "ccr") {
      out.modes = opt_int(doc, "modes", 1, path);
      out.has_h = doc.contains("h");
      known.insert({"modes", "h"});
      resolved["modes"] = out.modes;
      if (defer_h) {
        if (out.has_h)
          throw Error(path +
                      ".h: a fixed h conflicts with a limit schedule");
        out.pres = Presentation::ccr(out.modes, 1.0);
      } else {
        out.h = opt_double(doc, "h", 1.0, path);
        out.pres = Presentation::ccr(out.modes, out.h);
        resolved["h"] = out.h;
      }
    } else if (out.preset == "gram_boltzmann") {
      out.modes = opt_int(doc, "modes", 1, path);
      const Json& rows = require_key(doc, "gram", path);
      if (!rows.is_array() || int(rows.size()) != out.modes)
        throw Error(path + ".gram: expected " + std::to_string(out.modes) +
                    " rows");
      std::vector<Complex> gram;
      Json grow = Json::array();
      for (int i = 0; i < out.modes; ++i) {
        const Json& row = rows[i];
        std::string rp = path + ".gram[" + std::to_string(i) + "]";
        if (!row.is_array() || int(row.size()) != out.modes)
          throw Error(rp + ": expected " + std::to_string(out.modes) +
                      " entries");
        Json erow = Json::array();
        for (int j = 0; j < out.modes; ++j) {
          Complex z = as_complex(row[j], rp + "[" + std::to_string(j) + "]");
          gram.push_back(z);
          erow.push_back(cjson(z));
        }
        grow.push_back(std::move(erow));
      }
      out.pres = Presentation::gram_boltzmann(out.modes, std::move(gram));
      resolved["modes"] = out.modes;
      resolved["gram"] = std::move(grow);
      known.insert({"modes", "gram"});
    } else if (out.preset == "commutative") {
      int n = opt_int(doc, "generators", 1, path);
      out.modes = n;
      out.pres = Presentation::commutative(n);
      resolved["generators"] = n;
      known.insert("generators");
    } else {
      throw Error(path + ".preset: unknown preset '" + out.preset + "'");
    }
    echo_unknown(doc, known, path, resolved, warnings);
    return out;
  }

  std::string text;
  if (doc.contains("text")) {
    text = as_string(doc.at("text"), path + ".text");
    echo_unknown(doc, {"text"}, path, resolved, warnings);
  } else if (doc.contains("file")) {
    std::string file = as_string(doc.at("file"), path + ".file");
    std::string full =
        base_dir.empty() || file.front() == '/' ? file : base_dir + "/" + file;
    try {
      text = jobdetail::read_text_file(full);
    } catch (const Error& e) {
      throw Error(path + ".file: " + e.what());
    }
    echo_unknown(doc, {"file"}, path, resolved, warnings);
  } else {
    throw Error(path + ": needs one of 'preset', 'text' or 'file'");
  }
  out.pres = parse_presentation(text);
  resolved["text"] = text;
  return out;
}

struct StateDoc {
  StateSpec state;
  std::string kind;
  // gibbs pieces, kept separate so a limit schedule can rebuild per h
  double beta = 1.0;
  double h = 1.0;
  bool has_h = false;
  int truncation = 0;
};

inline StateDoc state_from_json(const Json& doc, const PresentationPtr& pres,
                                const std::string& path, Json& resolved,
                                std::vector<std::string>& warnings,
                                bool defer_h = false) {
  using namespace jobdetail;
  if (!doc.is_object()) throw Error(path + ": expected a JSON object");
  StateDoc out;
  out.kind = as_string(require_key(doc, "kind", path), path + ".kind");
  resolved["kind"] = out.kind;

  if (out.kind == "fock") {
    out.state = StateSpec::fock();
    echo_unknown(doc, {"kind"}, path, resolved, warnings);
  } else if (out.kind == "gaussian") {
    double sigma = opt_double(doc, "sigma", 1.0, path);
    out.state = StateSpec::gaussian(sigma);
    resolved["sigma"] = sigma;
    echo_unknown(doc, {"kind", "sigma"}, path, resolved, warnings);
  } else if (out.kind == "gibbs_oscillator") {
    out.beta = opt_double(doc, "beta", 1.0, path);
    out.has_h = doc.contains("h");
    out.truncation = opt_int(doc, "truncation", 0, path);
    resolved["beta"] = out.beta;
    if (defer_h) {
      if (out.has_h)
        throw Error(path + ".h: a fixed h conflicts with a limit schedule");
    } else {
      out.h = opt_double(doc, "h", 1.0, path);
      resolved["h"] = out.h;
      out.state = StateSpec::gibbs_oscillator(out.beta, out.h, out.truncation);
    }
    resolved["truncation"] = out.truncation;
    echo_unknown(doc, {"kind", "beta", "h", "truncation"}, path, resolved,
                 warnings);
  } else if (out.kind == "moment_table") {
    if (!pres)
      throw Error(path + ": a moment table needs its presentation first");
    const Json& rows = require_key(doc, "moments", path);
    if (!rows.is_array()) throw Error(path + ".moments: expected an array");
    TermMap table;
    Json erows = Json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::string rp = path + ".moments[" + std::to_string(i) + "]";
      const Json& row = rows[i];
      std::string wtext =
          as_string(require_key(row, "word", rp), rp + ".word");
      Complex v = as_complex(require_key(row, "value", rp), rp + ".value");
      Word w = parse_word(wtext, pres, rp + ".word");
      if (!table.emplace(w, v).second)
        throw Error(rp + ".word: duplicate entry for '" + pres->display(w) +
                    "'");
      echo_unknown(row, {"word", "value"}, rp, erows.emplace_back(Json{
                       {"word", jobdetail::spell(pres, w)},
                       {"value", cjson(v)}}),
                   warnings);
    }
    out.state = StateSpec::moment_table(std::move(table));
    resolved["moments"] = std::move(erows);
    echo_unknown(doc, {"kind", "moments"}, path, resolved, warnings);
  } else {
    throw Error(path + ".kind: unknown state kind '" + out.kind + "'");
  }
  return out;
}

// A context as configured: images stay as expression strings so a limit
// schedule can re-parse them against each stage's target presentation.
struct ContextDoc {
  std::string label;
  PresentationPtr source;
  StateSpec source_state;
  std::vector<std::pair<std::string, std::string>> images;  // gen -> expr
};

inline ContextMap build_context(const ContextDoc& c,
                                const PresentationPtr& target,
                                const std::string& path) {
  std::map<int, Polynomial> given;
  for (const auto& [name, expr] : c.images) {
    auto g = c.source->find(name);
    if (!g)
      throw Error(path + ".images: source has no generator '" + name + "'");
    try {
      given[*g] = parse_expression(expr, target);
    } catch (const Error& e) {
      throw Error(path + ".images." + name + ": " + e.what());
    }
  }
  return ContextMap::from_partial(c.source, target, given, c.label);
}

inline ContextDoc context_from_json(const Json& doc, const std::string& path,
                                    const PresentationPtr& default_source,
                                    const StateSpec* default_state,
                                    const std::string& base_dir,
                                    Json& resolved,
                                    std::vector<std::string>& warnings,
                                    int index) {
  using namespace jobdetail;
  if (!doc.is_object()) throw Error(path + ": expected a JSON object");
  ContextDoc out;
  out.label =
      opt_string(doc, "label", "context" + std::to_string(index + 1), path);
  resolved["label"] = out.label;

  if (doc.contains("source")) {
    Json rp = Json::object();
    out.source = presentation_from_json(doc.at("source"), base_dir,
                                        path + ".source", rp, warnings)
                     .pres;
    resolved["source"] = std::move(rp);
  } else if (default_source) {
    out.source = default_source;
  } else {
    throw Error(path + ".source: required key is missing");
  }

  if (doc.contains("state")) {
    Json rs = Json::object();
    out.source_state = state_from_json(doc.at("state"), out.source,
                                       path + ".state", rs, warnings)
                           .state;
    resolved["state"] = std::move(rs);
  } else if (default_state) {
    out.source_state = *default_state;
  } else {
    throw Error(path + ".state: required key is missing");
  }

  const Json& images = require_key(doc, "images", path);
  if (!images.is_object() || images.empty())
    throw Error(path + ".images: expected a nonempty object");
  Json ei = Json::object();
  for (auto it = images.begin(); it != images.end(); ++it) {
    std::string expr = as_string(it.value(), path + ".images." + it.key());
    out.images.emplace_back(it.key(), expr);
    ei[it.key()] = expr;
  }
  resolved["images"] = std::move(ei);
  echo_unknown(doc, {"label", "source", "state", "images"}, path, resolved,
               warnings);
  return out;
}

// ---------------------------------------------------------------------------
// Randomized algebra properties (shared by the algebra-check job and the
// acceptance battery).

struct PropertyResult {
  std::string name;
  int cases = 0;
  int failures = 0;
  double max_residual = 0.0;

  bool ok() const { return failures == 0; }
};

inline Polynomial random_polynomial(const PresentationPtr& pres,
                                    RandomStream& rng, int max_len = 4,
                                    int max_terms = 4) {
  const int terms = 1 + int(rng.next_u32() % uint32_t(max_terms));
  Polynomial acc = Polynomial::zero(pres);
  for (int t = 0; t < terms; ++t) {
    Word w(rng.next_u32() % uint32_t(max_len + 1));
    for (int& g : w) g = int(rng.next_u32() % uint32_t(pres->size()));
    acc += Polynomial::monomial(pres, w,
                                Complex(rng.next_gaussian(),
                                        rng.next_gaussian()));
  }
  return acc;
}

inline std::vector<PropertyResult> algebra_property_suite(
    const PresentationPtr& pres, int cases, std::uint64_t seed) {
  if (cases < 1) throw Error("property suite needs at least one case");
  std::vector<PropertyResult> out;
  uint32_t stream = 0;

  auto run = [&](const std::string& name, const PresentationPtr& p,
                 auto&& residual_of) {
    PropertyResult r{name, cases, 0, 0.0};
    const uint32_t id = stream++;
    for (int i = 0; i < cases; ++i) {
      RandomStream rng(seed, id, uint32_t(i));
      double res = residual_of(p, rng);
      r.max_residual = std::max(r.max_residual, res);
      if (!(res <= 1e-8)) ++r.failures;
    }
    out.push_back(std::move(r));
  };

  run("normal form is idempotent", pres,
      [](const PresentationPtr& p, RandomStream& rng) {
        Polynomial x = normal_form(random_polynomial(p, rng));
        return normal_form(x).distance(x);
      });
  run("normal form respects products", pres,
      [](const PresentationPtr& p, RandomStream& rng) {
        Polynomial x = random_polynomial(p, rng);
        Polynomial y = random_polynomial(p, rng);
        return normal_form(x * y).distance(
            normal_form(normal_form(x) * normal_form(y)));
      });
  run("adjoint reverses products", pres,
      [](const PresentationPtr& p, RandomStream& rng) {
        Polynomial x = random_polynomial(p, rng);
        Polynomial y = random_polynomial(p, rng);
        return normal_form(adjoint(x * y))
            .distance(normal_form(adjoint(y) * adjoint(x)));
      });
  run("reduction order does not matter", pres,
      [](const PresentationPtr& p, RandomStream& rng) {
        Polynomial x = random_polynomial(p, rng);
        NormalFormOptions right;
        right.order = RewriteOrder::rightmost;
        return normal_form(x).distance(normal_form(x, right));
      });

  auto commutator_residual = [](const PresentationPtr& p, RandomStream& rng) {
    Polynomial x = random_polynomial(p, rng);
    Polynomial y = random_polynomial(p, rng);
    return normal_form(x * y - y * x).max_coefficient();
  };
  if (pres->algebra_class() == AlgebraClass::ccr)
    run("zero deformation commutes", Presentation::ccr(pres->modes(), 0.0),
        commutator_residual);
  else if (pres->algebra_class() == AlgebraClass::commutative)
    run("zero deformation commutes", pres, commutator_residual);

  return out;
}

// ---------------------------------------------------------------------------
// Shared serialization pieces.

namespace jobdetail {

inline Json verdict_json(const FeasibilityVerdict& v,
                         const PresentationPtr& pres) {
  Json j;
  j["outcome"] = v.outcome_name();
  j["reason"] = v.reason;
  j["min_eigenvalue"] = v.min_eigenvalue;
  j["residual"] = v.residual;
  j["iterations"] = v.iterations;
  if (v.feasible() && pres) {
    Json a = Json::object();
    for (const auto& [w, z] : v.assignment) a[pres->display(w)] = cjson(z);
    j["assignment"] = std::move(a);
  }
  return j;
}

inline SolveOptions solve_options_from(const Json& in, const Overrides& ov,
                                       Json& resolved,
                                       const std::string& path,
                                       const char* tol_key = "tolerance") {
  SolveOptions opt;
  opt.tol = ov.tol ? *ov.tol : opt_double(in, tol_key, opt.tol, path);
  opt.max_iter = opt_int(in, "max_iterations", opt.max_iter, path);
  resolved[tol_key] = opt.tol;
  resolved["max_iterations"] = opt.max_iter;
  return opt;
}

inline void echo_output(const Json& in, const Overrides& ov, Json& resolved,
                        const std::string& path) {
  std::string out = ov.output ? *ov.output
                              : opt_string(in, "output", "", path);
  if (!out.empty()) resolved["output"] = out;
}

inline std::string output_of(const Json& resolved) {
  auto it = resolved.find("output");
  return it == resolved.end() ? std::string() : it->get<std::string>();
}

inline void echo_description(const Json& in, Json& resolved,
                             const std::string& path) {
  std::string d = opt_string(in, "description", "", path);
  if (!d.empty()) resolved["description"] = d;
}

inline Ensemble ensemble_from(const Json& in, Json& resolved,
                              const std::string& path) {
  std::string name =
      opt_string(in, "ensemble", "complex_hermitian", path);
  resolved["ensemble"] = name;
  if (name == "complex_hermitian") return Ensemble::complex_hermitian;
  if (name == "real_symmetric") return Ensemble::real_symmetric;
  throw Error(path + ".ensemble: unknown ensemble '" + name + "'");
}

struct JobOutcome {
  Json results;
  int exit = 0;
  std::string summary;
  std::string artifact;
};

// ---------------------------------------------------------------------------
// Runners, one per job kind.

inline JobOutcome run_algebra_check(const Json& in, const std::string& base,
                                    const Overrides& ov, Json& resolved,
                                    std::vector<std::string>& warnings) {
  echo_description(in, resolved, "$");
  Json rp = Json::object();
  PresentationPtr pres =
      presentation_from_json(require_key(in, "presentation", "$"), base,
                             "$.presentation", rp, warnings)
          .pres;
  resolved["presentation"] = std::move(rp);
  int cases = opt_int(in, "cases", 200, "$");
  if (cases < 1) throw Error("$.cases: must be positive");
  std::uint64_t seed = required_seed(in, ov, "$");
  resolved["cases"] = cases;
  resolved["seed"] = seed;
  echo_output(in, ov, resolved, "$");
  echo_unknown(in,
               {"job", "description", "presentation", "cases", "seed",
                "output"},
               "$", resolved, warnings);

  JobOutcome out;
  bool pass = true;
  Json props = Json::array();
  std::ostringstream text;
  for (const PropertyResult& r : algebra_property_suite(pres, cases, seed)) {
    pass = pass && r.ok();
    props.push_back(Json{{"name", r.name},
                         {"cases", r.cases},
                         {"failures", r.failures},
                         {"max_residual", r.max_residual}});
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", r.max_residual);
    text << (r.ok() ? "ok    " : "FAIL  ") << r.name << " (" << r.cases
         << " cases, max residual " << buf << ")\n";
  }
  out.results["properties"] = std::move(props);
  out.results["pass"] = pass;
  out.exit = pass ? 0 : 1;
  text << (pass ? "all properties hold" : "property violations found") << "\n";
  out.summary = text.str();
  return out;
}

inline JobOutcome run_moments(const Json& in, const std::string& base,
                              const Overrides& ov, Json& resolved,
                              std::vector<std::string>& warnings) {
  echo_description(in, resolved, "$");
  Json rp = Json::object();
  PresentationPtr pres =
      presentation_from_json(require_key(in, "presentation", "$"), base,
                             "$.presentation", rp, warnings)
          .pres;
  resolved["presentation"] = std::move(rp);
  Json rs = Json::object();
  StateSpec state = state_from_json(require_key(in, "state", "$"), pres,
                                    "$.state", rs, warnings)
                        .state;
  resolved["state"] = std::move(rs);

  std::vector<std::string> exprs;
  if (in.contains("expressions")) {
    const Json& list = in.at("expressions");
    if (!list.is_array()) throw Error("$.expressions: expected an array");
    for (std::size_t i = 0; i < list.size(); ++i)
      exprs.push_back(
          as_string(list[i], "$.expressions[" + std::to_string(i) + "]"));
    resolved["expressions"] = list;
  } else {
    int degree = ov.degree ? *ov.degree : opt_int(in, "degree", 2, "$");
    resolved["degree"] = degree;
    for (const Word& w : enumerate_basis_words(pres, degree))
      exprs.push_back(spell(pres, w));
  }
  echo_output(in, ov, resolved, "$");
  echo_unknown(in,
               {"job", "description", "presentation", "state", "degree",
                "expressions", "output"},
               "$", resolved, warnings);

  std::vector<Polynomial> parsed;
  for (std::size_t i = 0; i < exprs.size(); ++i) {
    try {
      parsed.push_back(parse_expression(exprs[i], pres));
    } catch (const Error& e) {
      throw Error("$.expressions[" + std::to_string(i) + "]: " + e.what());
    }
  }

  JobOutcome out;
  EvalDiagnostics diag;
  Json entries = Json::array();
  std::ostringstream text;
  for (std::size_t idx = 0; idx < exprs.size(); ++idx) {
    const std::string& e = exprs[idx];
    Complex v = state_evaluate(state, parsed[idx], &diag);
    entries.push_back(Json{{"expression", e}, {"value", cjson(v)}});
    char buf[80];
    std::snprintf(buf, sizeof buf, "%.12g%+.12gi", v.real(), v.imag());
    text << e << " = " << buf << "\n";
  }
  out.results["state"] = state.kind_name();
  out.results["entries"] = std::move(entries);
  if (state.kind == StateSpec::Kind::gibbs_oscillator) {
    out.results["diagnostics"] =
        Json{{"truncation", diag.gibbs_truncation},
             {"tail_weight", diag.gibbs_tail_weight},
             {"truncation_warning", diag.truncation_warning}};
    if (diag.truncation_warning)
      text << "warning: ladder truncation may be too small\n";
  }
  out.summary = text.str();
  return out;
}

inline JobOutcome run_pcp(const Json& in, const std::string& base,
                          const Overrides& ov, Json& resolved,
                          std::vector<std::string>& warnings) {
  echo_description(in, resolved, "$");
  Json rp = Json::object();
  PresentationPtr target =
      presentation_from_json(require_key(in, "presentation", "$"), base,
                             "$.presentation", rp, warnings)
          .pres;
  resolved["presentation"] = std::move(rp);
  int degree = ov.degree ? *ov.degree : opt_int(in, "degree", 2, "$");
  if (degree < 1) throw Error("$.degree: must be positive");
  resolved["degree"] = degree;
  SolveOptions opt = solve_options_from(in, ov, resolved, "$");

  std::vector<std::pair<Word, Complex>> pins;
  if (in.contains("pins")) {
    const Json& list = in.at("pins");
    if (!list.is_array()) throw Error("$.pins: expected an array");
    Json epins = Json::array();
    for (std::size_t i = 0; i < list.size(); ++i) {
      std::string pp = "$.pins[" + std::to_string(i) + "]";
      std::string wtext =
          as_string(require_key(list[i], "word", pp), pp + ".word");
      Complex v = as_complex(require_key(list[i], "value", pp), pp + ".value");
      Word w = parse_word(wtext, target, pp + ".word");
      pins.emplace_back(w, v);
      echo_unknown(list[i], {"word", "value"}, pp,
                   epins.emplace_back(Json{{"word", spell(target, w)},
                                           {"value", cjson(v)}}),
                   warnings);
    }
    resolved["pins"] = std::move(epins);
  }

  std::vector<std::pair<ContextMap, StateSpec>> ctx;
  if (in.contains("contexts")) {
    const Json& list = in.at("contexts");
    if (!list.is_array()) throw Error("$.contexts: expected an array");
    Json ectx = Json::array();
    for (std::size_t i = 0; i < list.size(); ++i) {
      std::string cp = "$.contexts[" + std::to_string(i) + "]";
      Json ec = Json::object();
      ContextDoc doc = context_from_json(list[i], cp, nullptr, nullptr, base,
                                         ec, warnings, int(i));
      ctx.emplace_back(build_context(doc, target, cp), doc.source_state);
      ectx.push_back(std::move(ec));
    }
    resolved["contexts"] = std::move(ectx);
  }
  echo_output(in, ov, resolved, "$");
  echo_unknown(in,
               {"job", "description", "presentation", "degree", "tolerance",
                "max_iterations", "pins", "contexts", "output"},
               "$", resolved, warnings);

  JobOutcome out;
  PcpReport rep;
  if (ctx.empty()) {
    MomentMatrix m = build_moment_matrix(target, degree, pins);
    rep.degree = degree;
    rep.basis_size = int(m.basis.size());
    for (const auto& [w, v] : pins) rep.pins.push_back({w, v, "pin"});
    rep.verdict = feasibility_solve(m, opt);
  } else {
    rep = pcp_check(target, ctx, degree, opt, pins);
  }

  Json jpins = Json::array();
  for (const PinRecord& p : rep.pins)
    jpins.push_back(Json{{"word", target->display(p.word)},
                         {"value", cjson(p.value)},
                         {"context", p.context_label}});
  out.results["degree"] = rep.degree;
  out.results["basis_size"] = rep.basis_size;
  out.results["extra_constraints"] = rep.extra_constraint_count;
  out.results["pins"] = std::move(jpins);
  out.results["verdict"] = verdict_json(rep.verdict, target);
  out.exit = rep.verdict.feasible() ? 0 : 1;

  std::ostringstream text;
  text << "verdict: " << rep.verdict.outcome_name();
  if (!rep.verdict.reason.empty()) text << " (" << rep.verdict.reason << ")";
  text << "\n"
       << rep.pins.size() << " pinned moments, basis of " << rep.basis_size
       << " words at degree " << rep.degree << "\n";
  out.summary = text.str();
  return out;
}

inline JobOutcome run_quantize(const Json& in, const std::string& base,
                               const Overrides& ov, Json& resolved,
                               std::vector<std::string>& warnings) {
  echo_description(in, resolved, "$");
  std::string mode = opt_string(in, "mode", "exact", "$");
  if (mode != "exact" && mode != "limit")
    throw Error("$.mode: expected 'exact' or 'limit'");
  resolved["mode"] = mode;
  const bool limit = mode == "limit";

  const Json& src = require_key(in, "source", "$");
  Json rsrc = Json::object();
  Json rsp = Json::object();
  PresentationPtr source =
      presentation_from_json(require_key(src, "presentation", "$.source"),
                             base, "$.source.presentation", rsp, warnings)
          .pres;
  rsrc["presentation"] = std::move(rsp);
  Json rss = Json::object();
  StateSpec source_state =
      state_from_json(require_key(src, "state", "$.source"), source,
                      "$.source.state", rss, warnings)
          .state;
  rsrc["state"] = std::move(rss);
  echo_unknown(src, {"presentation", "state"}, "$.source", rsrc, warnings);
  resolved["source"] = std::move(rsrc);

  const Json& tgt = require_key(in, "target", "$");
  Json rtgt = Json::object();
  Json rtp = Json::object();
  PresentationDoc target_doc =
      presentation_from_json(require_key(tgt, "presentation", "$.target"),
                             base, "$.target.presentation", rtp, warnings,
                             limit);
  rtgt["presentation"] = std::move(rtp);
  Json rts = Json::object();
  StateDoc target_state =
      state_from_json(require_key(tgt, "state", "$.target"), target_doc.pres,
                      "$.target.state", rts, warnings, limit);
  rtgt["state"] = std::move(rts);
  echo_unknown(tgt, {"presentation", "state"}, "$.target", rtgt, warnings);
  resolved["target"] = std::move(rtgt);

  if (limit) {
    if (target_doc.preset != "ccr")
      throw Error(
          "$.target.presentation: a limit schedule needs the ccr preset");
    if (target_state.kind != "gibbs_oscillator")
      throw Error(
          "$.target.state: a limit schedule needs the gibbs_oscillator state");
  }

  const Json& clist = require_key(in, "contexts", "$");
  if (!clist.is_array() || clist.empty())
    throw Error("$.contexts: expected a nonempty array");
  std::vector<ContextDoc> contexts;
  Json ectx = Json::array();
  for (std::size_t i = 0; i < clist.size(); ++i) {
    std::string cp = "$.contexts[" + std::to_string(i) + "]";
    Json ec = Json::object();
    contexts.push_back(context_from_json(clist[i], cp, source, &source_state,
                                         base, ec, warnings, int(i)));
    ectx.push_back(std::move(ec));
  }
  resolved["contexts"] = std::move(ectx);

  std::vector<double> schedule;
  if (limit) {
    if (in.contains("schedule")) {
      const Json& s = in.at("schedule");
      if (!s.is_array()) throw Error("$.schedule: expected an array");
      for (std::size_t i = 0; i < s.size(); ++i)
        schedule.push_back(
            as_double(s[i], "$.schedule[" + std::to_string(i) + "]"));
    } else {
      schedule = {1.0, 0.3, 0.1, 0.03, 0.01};
    }
    resolved["schedule"] = schedule;
  }

  QuantizationOptions opt;
  opt.degree = ov.degree ? *ov.degree : opt_int(in, "degree", 2, "$");
  opt.correspondence_degree = opt_int(in, "correspondence_degree", 0, "$");
  opt.exact_tol =
      ov.tol ? *ov.tol : opt_double(in, "tolerance", opt.exact_tol, "$");
  opt.limit_final_tol =
      opt_double(in, "final_tolerance", opt.limit_final_tol, "$");
  opt.solve.tol = opt_double(in, "solver_tolerance", opt.solve.tol, "$");
  opt.solve.max_iter = opt_int(in, "max_iterations", opt.solve.max_iter, "$");
  resolved["degree"] = opt.degree;
  if (opt.correspondence_degree > 0)
    resolved["correspondence_degree"] = opt.correspondence_degree;
  resolved["tolerance"] = opt.exact_tol;
  if (limit) resolved["final_tolerance"] = opt.limit_final_tol;
  resolved["solver_tolerance"] = opt.solve.tol;
  resolved["max_iterations"] = opt.solve.max_iter;
  echo_output(in, ov, resolved, "$");
  echo_unknown(in,
               {"job", "description", "mode", "source", "target", "contexts",
                "schedule", "degree", "correspondence_degree", "tolerance",
                "final_tolerance", "solver_tolerance", "max_iterations",
                "output"},
               "$", resolved, warnings);

  std::vector<FamilyMember> family;
  std::vector<LimitStage> stages;
  PresentationPtr report_target = target_doc.pres;
  if (limit) {
    for (double h : schedule) {
      LimitStage st;
      st.h = h;
      PresentationPtr pres_h = Presentation::ccr(target_doc.modes, h);
      for (std::size_t i = 0; i < contexts.size(); ++i)
        st.maps.push_back(build_context(contexts[i], pres_h,
                                        "$.contexts[" + std::to_string(i) +
                                            "]"));
      st.target_state = StateSpec::gibbs_oscillator(
          target_state.beta, h, target_state.truncation);
      stages.push_back(std::move(st));
    }
    if (stages.empty()) throw Error("$.schedule: expected at least one point");
    report_target = stages.back().maps.front().target();
    for (std::size_t i = 0; i < contexts.size(); ++i)
      family.push_back(
          FamilyMember{stages.front().maps[i], contexts[i].source_state});
  } else {
    for (std::size_t i = 0; i < contexts.size(); ++i)
      family.push_back(FamilyMember{
          build_context(contexts[i], target_doc.pres,
                        "$.contexts[" + std::to_string(i) + "]"),
          contexts[i].source_state});
  }

  QuantizationVerdict v = contextual_quantization_verify(
      family, target_state.state, stages, opt);

  JobOutcome out;
  out.results["mode"] = mode;
  out.results["overall"] = v.overall();
  out.results["homomorphism_ok"] = v.homomorphism_ok;
  out.results["injectivity_ok"] = v.injectivity_ok;
  out.results["generation_ok"] = v.generation_ok;
  out.results["correspondence_ok"] = v.correspondence_ok;
  out.results["pcp_ok"] = v.pcp_ok;
  Json corr = Json::array();
  for (std::size_t i = 0; i < v.correspondence.size(); ++i) {
    const CorrespondenceReport& r = v.correspondence[i];
    Json errs = Json::array();
    for (const auto& [param, err] : r.errors)
      errs.push_back(Json::array({param, err}));
    corr.push_back(Json{{"context", family[i].map.label()},
                        {"ok", r.ok},
                        {"final_error", r.final_error},
                        {"errors", std::move(errs)}});
  }
  out.results["correspondence"] = std::move(corr);
  Json jpins = Json::array();
  for (const PinRecord& p : v.pcp.pins)
    jpins.push_back(Json{{"word", report_target->display(p.word)},
                         {"value", cjson(p.value)},
                         {"context", p.context_label}});
  out.results["pcp"] = Json{{"degree", v.pcp.degree},
                            {"basis_size", v.pcp.basis_size},
                            {"extra_constraints", v.pcp.extra_constraint_count},
                            {"pins", std::move(jpins)},
                            {"verdict",
                             verdict_json(v.pcp.verdict, report_target)}};
  out.results["notes"] = v.notes;
  out.exit = v.overall() ? 0 : 1;

  std::ostringstream text;
  auto line = [&](const char* what, bool ok) {
    text << (ok ? "ok    " : "FAIL  ") << what << "\n";
  };
  line("homomorphism", v.homomorphism_ok);
  line("injectivity", v.injectivity_ok);
  line("generation", v.generation_ok);
  line("correspondence", v.correspondence_ok);
  line("moment feasibility", v.pcp_ok);
  for (const std::string& n : v.notes) text << "  " << n << "\n";
  text << "overall: " << (v.overall() ? "pass" : "fail") << "\n";
  out.summary = text.str();
  return out;
}

inline JobOutcome run_twoslit(const Json& in, const std::string&,
                              const Overrides& ov, Json& resolved,
                              std::vector<std::string>& warnings) {
  echo_description(in, resolved, "$");
  const Json& mlist = require_key(in, "marginals", "$");
  if (!mlist.is_array() || mlist.empty())
    throw Error("$.marginals: expected a nonempty array");

  int n = opt_int(in, "dimension", 0, "$");
  if (n == 0) {
    const Json& first = require_key(mlist[0], "probabilities",
                                    "$.marginals[0]");
    if (!first.is_array())
      throw Error("$.marginals[0].probabilities: expected an array");
    n = int(first.size());
  }
  if (n < 1) throw Error("$.dimension: must be positive");
  resolved["dimension"] = n;

  auto basis_from = [&](const Json& j, const std::string& path,
                        Json& echo) -> ComplexMatrix {
    if (j.is_string()) {
      std::string name = j.get<std::string>();
      echo = name;
      if (name == "identity") {
        ComplexMatrix u(n, n);
        for (int i = 0; i < n; ++i) u(i, i) = 1.0;
        return u;
      }
      if (name == "hadamard") {
        if (n != 2)
          throw Error(path + ": the hadamard basis needs dimension 2");
        ComplexMatrix u(2, 2);
        const double s = 1.0 / std::sqrt(2.0);
        u(0, 0) = s;
        u(0, 1) = s;
        u(1, 0) = s;
        u(1, 1) = -s;
        return u;
      }
      throw Error(path + ": unknown basis '" + name + "'");
    }
    if (!j.is_array() || int(j.size()) != n)
      throw Error(path + ": expected 'identity', 'hadamard' or " +
                  std::to_string(n) + " matrix rows");
    ComplexMatrix u(n, n);
    Json rows = Json::array();
    for (int i = 0; i < n; ++i) {
      std::string rp = path + "[" + std::to_string(i) + "]";
      if (!j[i].is_array() || int(j[i].size()) != n)
        throw Error(rp + ": expected " + std::to_string(n) + " entries");
      Json row = Json::array();
      for (int k = 0; k < n; ++k) {
        u(i, k) = as_complex(j[i][k], rp + "[" + std::to_string(k) + "]");
        row.push_back(cjson(u(i, k)));
      }
      rows.push_back(std::move(row));
    }
    echo = std::move(rows);
    return u;
  };

  std::vector<std::pair<ComplexMatrix, std::vector<double>>> marginals;
  Json em = Json::array();
  for (std::size_t i = 0; i < mlist.size(); ++i) {
    std::string mp = "$.marginals[" + std::to_string(i) + "]";
    Json basis_echo;
    ComplexMatrix u = basis_from(require_key(mlist[i], "basis", mp),
                                 mp + ".basis", basis_echo);
    const Json& pj = require_key(mlist[i], "probabilities", mp);
    if (!pj.is_array() || int(pj.size()) != n)
      throw Error(mp + ".probabilities: expected " + std::to_string(n) +
                  " entries");
    std::vector<double> probs(n);
    for (int k = 0; k < n; ++k)
      probs[k] = as_double(pj[k],
                           mp + ".probabilities[" + std::to_string(k) + "]");
    marginals.emplace_back(std::move(u), probs);
    Json ej = Json{{"basis", std::move(basis_echo)},
                   {"probabilities", probs}};
    echo_unknown(mlist[i], {"basis", "probabilities"}, mp, ej, warnings);
    em.push_back(std::move(ej));
  }
  resolved["marginals"] = std::move(em);
  SolveOptions opt =
      solve_options_from(in, ov, resolved, "$", "solver_tolerance");
  echo_output(in, ov, resolved, "$");
  echo_unknown(in,
               {"job", "description", "dimension", "marginals",
                "solver_tolerance", "max_iterations", "output"},
               "$", resolved, warnings);

  ComplexMatrix witness;
  FeasibilityVerdict v = density_marginal_feasible(n, marginals, opt, &witness);

  JobOutcome out;
  out.results["dimension"] = n;
  out.results["verdict"] = verdict_json(v, nullptr);
  if (v.feasible()) {
    Json w = Json::array();
    for (int i = 0; i < n; ++i) {
      Json row = Json::array();
      for (int j = 0; j < n; ++j) row.push_back(cjson(witness(i, j)));
      w.push_back(std::move(row));
    }
    out.results["witness"] = std::move(w);
    Json rep = Json::array();
    for (const auto& [u, probs] : marginals) {
      Json back = Json::array();
      for (int k = 0; k < n; ++k) {
        Complex acc = 0.0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            acc += std::conj(u(i, k)) * witness(i, j) * u(j, k);
        back.push_back(acc.real());
      }
      rep.push_back(std::move(back));
    }
    out.results["reproduced_marginals"] = std::move(rep);
  }
  out.exit = v.feasible() ? 0 : 1;
  std::ostringstream text;
  text << "verdict: " << v.outcome_name();
  if (!v.reason.empty()) text << " (" << v.reason << ")";
  text << "\n";
  out.summary = text.str();
  return out;
}

inline JobOutcome run_wigner_like(const Json& in, const Overrides& ov,
                                  Json& resolved,
                                  std::vector<std::string>& warnings,
                                  bool sweep) {
  echo_description(in, resolved, "$");
  Ensemble ens = ensemble_from(in, resolved, "$");

  std::vector<int> Ns;
  if (sweep) {
    if (in.contains("Ns")) {
      const Json& list = in.at("Ns");
      if (!list.is_array()) throw Error("$.Ns: expected an array");
      for (std::size_t i = 0; i < list.size(); ++i)
        Ns.push_back(as_int(list[i], "$.Ns[" + std::to_string(i) + "]"));
    } else {
      Ns = {50, 100, 200, 400};
    }
    resolved["Ns"] = Ns;
  } else {
    auto it = in.find("N");
    if (it == in.end()) throw Error("$.N: required key is missing");
    Ns = {as_int(*it, "$.N")};
    resolved["N"] = Ns[0];
  }

  int kmax = opt_int(in, "kmax", 4, "$");
  int trials = opt_int(in, "trials", 50, "$");
  std::uint64_t seed = required_seed(in, ov, "$");
  resolved["kmax"] = kmax;
  resolved["trials"] = trials;
  resolved["seed"] = seed;
  echo_output(in, ov, resolved, "$");
  echo_unknown(in,
               {"job", "description", "ensemble", sweep ? "Ns" : "N", "kmax",
                "trials", "seed", "output"},
               "$", resolved, warnings);

  JobOutcome out;
  out.artifact = convergence_sweep(Ns, kmax, trials, seed, ens);
  out.results["rows"] = int(Ns.size()) * kmax;
  out.results["csv"] = out.artifact;
  std::ostringstream text;
  text << "estimated " << kmax << " trace moments at " << Ns.size()
       << (Ns.size() == 1 ? " size" : " sizes") << ", " << trials
       << " trials each\n";
  out.summary = text.str();
  return out;
}

inline JobOutcome run_replica(const Json& in, const Overrides& ov,
                              Json& resolved,
                              std::vector<std::string>& warnings) {
  echo_description(in, resolved, "$");
  EnsembleConfig cfg;
  cfg.ensemble = ensemble_from(in, resolved, "$");
  cfg.N = as_int(require_key(in, "N", "$"), "$.N");
  cfg.replicas = as_int(require_key(in, "replicas", "$"), "$.replicas");
  const Json& cj = require_key(in, "coefficients", "$");
  if (!cj.is_array()) throw Error("$.coefficients: expected an array");
  Json ecoef = Json::array();
  for (std::size_t i = 0; i < cj.size(); ++i) {
    Complex z = as_complex(cj[i], "$.coefficients[" + std::to_string(i) + "]");
    cfg.coefficients.push_back(z);
    ecoef.push_back(cjson(z));
  }
  cfg.trials = opt_int(in, "trials", 50, "$");
  cfg.seed = required_seed(in, ov, "$");
  double threshold = opt_double(in, "sigma_threshold", 4.0, "$");
  resolved["N"] = cfg.N;
  resolved["replicas"] = cfg.replicas;
  resolved["coefficients"] = std::move(ecoef);
  resolved["trials"] = cfg.trials;
  resolved["seed"] = cfg.seed;
  resolved["sigma_threshold"] = threshold;

  const Json& plist = require_key(in, "patterns", "$");
  if (!plist.is_array() || plist.empty())
    throw Error("$.patterns: expected a nonempty array");
  std::vector<std::vector<int>> patterns;
  Json epat = Json::array();
  for (std::size_t i = 0; i < plist.size(); ++i) {
    std::string pp = "$.patterns[" + std::to_string(i) + "]";
    if (!plist[i].is_array()) throw Error(pp + ": expected an array");
    std::vector<int> pattern;
    Json ep = Json::array();
    for (std::size_t j = 0; j < plist[i].size(); ++j) {
      const Json& item = plist[i][j];
      std::string ip = pp + "[" + std::to_string(j) + "]";
      if (item.is_string()) {
        if (item.get<std::string>() != "delta")
          throw Error(ip + ": expected a replica label or \"delta\"");
        pattern.push_back(kDeltaLabel);
        ep.push_back("delta");
      } else {
        pattern.push_back(as_int(item, ip));
        ep.push_back(pattern.back());
      }
    }
    patterns.push_back(std::move(pattern));
    epat.push_back(std::move(ep));
  }
  resolved["patterns"] = std::move(epat);
  echo_output(in, ov, resolved, "$");
  echo_unknown(in,
               {"job", "description", "ensemble", "N", "replicas",
                "coefficients", "trials", "seed", "patterns",
                "sigma_threshold", "output"},
               "$", resolved, warnings);

  JobOutcome out;
  bool pass = true;
  Json rows = Json::array();
  std::ostringstream text;
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    ReplicaResult r = replica_moment_experiment(cfg, patterns[i]);
    bool ok = r.sigma_distance <= threshold;
    pass = pass && ok;
    rows.push_back(Json{{"pattern", resolved["patterns"][i]},
                        {"mean", r.estimate.mean},
                        {"stderr", r.estimate.stderr_of_mean},
                        {"prediction", cjson(r.prediction)},
                        {"abs_error", r.abs_error},
                        {"sigma_distance", r.sigma_distance},
                        {"pass", ok}});
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "mean %.6g vs prediction %.6g%+.6gi (%.2f sigma)",
                  r.estimate.mean, r.prediction.real(), r.prediction.imag(),
                  r.sigma_distance);
    text << (ok ? "ok    " : "FAIL  ") << "pattern "
         << resolved["patterns"][i].dump() << ": " << buf << "\n";
  }
  out.results["patterns"] = std::move(rows);
  out.results["pass"] = pass;
  out.exit = pass ? 0 : 1;
  text << (pass ? "all patterns within " : "some patterns beyond ")
       << threshold << " sigma\n";
  out.summary = text.str();
  return out;
}

}  // namespace jobdetail

inline const std::vector<std::string>& job_kinds() {
  static const std::vector<std::string> kinds = {
      "algebra_check", "moments", "pcp",    "quantize",
      "twoslit",       "wigner",  "replica", "sweep"};
  return kinds;
}

inline RunResult run_job(const Json& input, const std::string& base_dir,
                         const Overrides& ov) {
  using namespace jobdetail;
  if (!input.is_object()) throw Error("$: config must be a JSON object");
  std::string kind =
      as_string(require_key(input, "job", "$"), "$.job");
  bool known = false;
  for (const std::string& k : job_kinds()) known = known || k == kind;
  if (!known) throw Error("$.job: unknown job kind '" + kind + "'");

  Json resolved = Json::object();
  resolved["job"] = kind;
  std::vector<std::string> warnings;
  JobOutcome out;
  if (kind == "algebra_check")
    out = run_algebra_check(input, base_dir, ov, resolved, warnings);
  else if (kind == "moments")
    out = run_moments(input, base_dir, ov, resolved, warnings);
  else if (kind == "pcp")
    out = run_pcp(input, base_dir, ov, resolved, warnings);
  else if (kind == "quantize")
    out = run_quantize(input, base_dir, ov, resolved, warnings);
  else if (kind == "twoslit")
    out = run_twoslit(input, base_dir, ov, resolved, warnings);
  else if (kind == "wigner")
    out = run_wigner_like(input, ov, resolved, warnings, false);
  else if (kind == "sweep")
    out = run_wigner_like(input, ov, resolved, warnings, true);
  else
    out = run_replica(input, ov, resolved, warnings);

  RunResult r;
  r.report["tool"] = Json{{"name", "ncq"}, {"version", kVersion}};
  r.report["job"] = std::move(resolved);
  r.report["warnings"] = warnings;
  r.report["results"] = std::move(out.results);
  r.report["exit"] = out.exit;
  r.exit_code = out.exit;
  r.summary = std::move(out.summary);
  r.artifact = std::move(out.artifact);
  if (!r.artifact.empty()) r.artifact_path = output_of(r.report["job"]);
  return r;
}

}  // namespace ncq
