#pragma once

#include <cctype>
#include <charconv>
#include <string>
#include <string_view>
#include <vector>

#include "ncq/algebra.hpp"

// Text forms. A presentation document is a sequence of statements separated
// by newlines or semicolons ('#' starts a comment):
//
//   class <boltzmann|ccr|gram_boltzmann|commutative|custom>
//   modes <n>
//   param <name> = <real>
//   gen <name> [adj <name>]          (custom only)
//   rule <letter> <letter> -> <expr> (custom only)
//   gram <entry> <entry> ...         (gram_boltzmann only, row-major)
//
// Expressions combine generators, parameters and complex scalars with
// + - *, parentheses, integer powers '^', and the postfix adjoint tick.
// The full grammar ships in docs/grammar.bnf.

namespace ncq {

namespace detail {

inline bool ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
inline bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Generator names admit one trailing '*' so adjoint partners can be written
// the way people write them on paper ("gen a adj a*").
inline bool valid_generator_name(std::string_view n) {
  if (n.empty() || !ident_start(n[0])) return false;
  size_t body = n.size();
  if (n.back() == '*') --body;
  if (body == 0) return false;
  for (size_t i = 1; i < body; ++i)
    if (!ident_char(n[i])) return false;
  return n != "i";
}

struct ExprParser {
  std::string_view s;
  size_t i = 0;
  int line = 1;
  int col = 1;
  PresentationPtr pres;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, line, col);
  }

  void bump() {
    if (s[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++i;
  }

  void skip_ws() {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i])))
      bump();
  }

  char peek() {
    skip_ws();
    return i < s.size() ? s[i] : '\0';
  }

  Polynomial run() {
    Polynomial v = expr();
    if (peek() != '\0') fail(std::string("unexpected character '") + s[i] + "'");
    return v;
  }

  Polynomial expr() {
    char c = peek();
    bool negate = c == '-';
    if (c == '-' || c == '+') bump();
    Polynomial acc = term();
    if (negate) acc *= Complex(-1.0);
    for (;;) {
      c = peek();
      if (c != '+' && c != '-') return acc;
      bump();
      Polynomial t = term();
      if (c == '-') t *= Complex(-1.0);
      acc += t;
    }
  }

  bool at_factor() {
    char c = peek();
    return ident_start(c) || std::isdigit(static_cast<unsigned char>(c)) ||
           c == '.' || c == '(';
  }

  Polynomial term() {
    Polynomial acc = factor();
    for (;;) {
      if (peek() == '*') {
        bump();
        acc *= factor();
      } else if (at_factor()) {
        acc *= factor();  // juxtaposition is multiplication
      } else {
        return acc;
      }
    }
  }

  Polynomial factor() {
    Polynomial v = primary();
    for (;;) {
      char c = peek();
      if (c == '\'') {
        bump();
        v = adjoint(v);
      } else if (c == '^') {
        bump();
        skip_ws();
        size_t j = i;
        while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j])))
          ++j;
        if (j == i) fail("expected integer exponent after '^'");
        int k = 0;
        std::from_chars(s.data() + i, s.data() + j, k);
        while (i < j) bump();
        v = v.pow(k);
      } else {
        return v;
      }
    }
  }

  Polynomial primary() {
    char c = peek();
    if (c == '\0') fail("unexpected end of expression");
    if (c == '(') {
      bump();
      Polynomial v = expr();
      if (peek() != ')') fail("expected ')'");
      bump();
      return v;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (ident_start(c)) return symbol();
    fail(std::string("unexpected character '") + c + "'");
  }

  Polynomial number() {
    double value = 0.0;
    auto [end, ec] =
        std::from_chars(s.data() + i, s.data() + s.size(), value);
    if (ec != std::errc()) fail("malformed scalar");
    while (s.data() + i < end) bump();
    if (i < s.size() && s[i] == 'i' && (i + 1 >= s.size() || !ident_char(s[i + 1]))) {
      bump();
      return Polynomial::scalar(pres, Complex(0.0, value));
    }
    return Polynomial::scalar(pres, value);
  }

  Polynomial symbol() {
    size_t j = i;
    while (j < s.size() && ident_char(s[j])) ++j;
    std::string name(s.substr(i, j - i));
    if (name == "i") {
      while (i < j) bump();
      return Polynomial::scalar(pres, Complex(0.0, 1.0));
    }
    // A '*' glued to the identifier belongs to the name when such a
    // generator exists; otherwise it stays a multiplication sign.
    if (j < s.size() && s[j] == '*' && pres->find(name + "*")) {
      name += '*';
      ++j;
    }
    while (i < j) bump();
    if (auto id = pres->find(name))
      return Polynomial::generator(pres, *id);
    if (auto it = pres->parameters().find(name); it != pres->parameters().end())
      return Polynomial::scalar(pres, it->second);
    fail("unknown symbol '" + name + "'");
  }
};

inline Complex parse_complex_literal(std::string_view t, int line, int col) {
  auto fail = [&]() -> Complex {
    throw ParseError("malformed complex literal '" + std::string(t) + "'", line,
                     col);
  };
  double sign = 1.0;
  size_t i = 0;
  if (i < t.size() && (t[i] == '+' || t[i] == '-')) {
    if (t[i] == '-') sign = -1.0;
    ++i;
  }
  if (t.substr(i) == "i") return Complex(0.0, sign);
  double a = 0.0;
  auto [p, ec] = std::from_chars(t.data() + i, t.data() + t.size(), a);
  if (ec != std::errc()) return fail();
  a *= sign;
  i = static_cast<size_t>(p - t.data());
  if (i == t.size()) return Complex(a, 0.0);
  if (t[i] == 'i' && i + 1 == t.size()) return Complex(0.0, a);
  if (t[i] != '+' && t[i] != '-') return fail();
  double bsign = t[i] == '-' ? -1.0 : 1.0;
  ++i;
  if (t.substr(i) == "i") return Complex(a, bsign);
  double b = 0.0;
  auto [q, ec2] = std::from_chars(t.data() + i, t.data() + t.size(), b);
  if (ec2 != std::errc()) return fail();
  i = static_cast<size_t>(q - t.data());
  if (i + 1 != t.size() || t[i] != 'i') return fail();
  return Complex(a, bsign * b);
}

}  // namespace detail

inline Polynomial parse_expression(std::string_view text,
                                   const PresentationPtr& pres) {
  if (!pres) throw Error("parse_expression needs a presentation");
  detail::ExprParser p{text, 0, 1, 1, pres};
  return p.run();
}

namespace detail {

struct Statement {
  std::string text;
  int line = 1;
  int col = 1;
};

inline std::vector<Statement> split_statements(std::string_view text) {
  std::vector<Statement> out;
  Statement cur;
  int line = 1, col = 1;
  bool started = false;
  auto flush = [&]() {
    while (!cur.text.empty() && std::isspace(static_cast<unsigned char>(cur.text.back())))
      cur.text.pop_back();
    if (!cur.text.empty()) out.push_back(cur);
    cur = Statement{};
    started = false;
  };
  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
      --i;
      continue;
    }
    if (c == ';' || c == '\n') {
      flush();
    } else {
      if (!started && !std::isspace(static_cast<unsigned char>(c))) {
        cur.line = line;
        cur.col = col;
        started = true;
      }
      if (started) cur.text += c;
    }
    if (c == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  flush();
  return out;
}

inline std::vector<std::string> words_of(std::string_view s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

// A rule's left side names letters directly: an identifier, an optional glued
// '*', and any number of adjoint ticks.
inline int resolve_letter(const std::string& tok, const PresentationPtr& pres,
                          int line, int col) {
  size_t end = tok.size();
  int ticks = 0;
  while (end > 0 && tok[end - 1] == '\'') {
    ++ticks;
    --end;
  }
  std::string base = tok.substr(0, end);
  auto id = pres->find(base);
  if (!id) throw ParseError("unknown generator '" + base + "'", line, col);
  int g = *id;
  for (int t = 0; t < ticks; ++t) g = pres->adjoint_of(g);
  return g;
}

}  // namespace detail

inline PresentationPtr parse_presentation(std::string_view text) {
  using detail::Statement;
  std::vector<Statement> stmts = detail::split_statements(text);

  bool have_class = false;
  AlgebraClass cls = AlgebraClass::custom;
  int modes = 1;
  bool have_modes = false;
  std::map<std::string, double> params;
  std::vector<GeneratorSymbol> gens;
  std::vector<Statement> rule_stmts;
  std::vector<Complex> gram;
  bool have_gram = false;

  for (const Statement& st : stmts) {
    std::vector<std::string> toks = detail::words_of(st.text);
    const std::string& head = toks[0];
    if (head == "class") {
      if (have_class) throw ParseError("duplicate class statement", st.line, st.col);
      if (toks.size() != 2) throw ParseError("expected: class <tag>", st.line, st.col);
      have_class = true;
      const std::string& tag = toks[1];
      if (tag == "boltzmann") cls = AlgebraClass::boltzmann;
      else if (tag == "ccr") cls = AlgebraClass::ccr;
      else if (tag == "gram_boltzmann") cls = AlgebraClass::gram_boltzmann;
      else if (tag == "commutative") cls = AlgebraClass::commutative;
      else if (tag == "custom") cls = AlgebraClass::custom;
      else throw ParseError("unknown class tag '" + tag + "'", st.line, st.col);
    } else if (head == "modes") {
      if (have_modes) throw ParseError("duplicate modes statement", st.line, st.col);
      if (toks.size() != 2) throw ParseError("expected: modes <n>", st.line, st.col);
      auto [p, ec] = std::from_chars(toks[1].data(), toks[1].data() + toks[1].size(), modes);
      if (ec != std::errc() || p != toks[1].data() + toks[1].size() || modes < 1)
        throw ParseError("modes must be a positive integer", st.line, st.col);
      have_modes = true;
    } else if (head == "param") {
      std::string rest = st.text.substr(5);
      size_t eq = rest.find('=');
      if (eq == std::string::npos)
        throw ParseError("expected: param <name> = <real>", st.line, st.col);
      std::vector<std::string> name_toks = detail::words_of(rest.substr(0, eq));
      std::vector<std::string> val_toks = detail::words_of(rest.substr(eq + 1));
      if (name_toks.size() != 1 || val_toks.size() != 1)
        throw ParseError("expected: param <name> = <real>", st.line, st.col);
      double v = 0.0;
      const std::string& vs = val_toks[0];
      auto [p, ec] = std::from_chars(vs.data(), vs.data() + vs.size(), v);
      if (ec != std::errc() || p != vs.data() + vs.size())
        throw ParseError("malformed parameter value", st.line, st.col);
      if (!params.emplace(name_toks[0], v).second)
        throw ParseError("duplicate parameter '" + name_toks[0] + "'", st.line, st.col);
    } else if (head == "gen") {
      if (toks.size() != 2 && !(toks.size() == 4 && toks[2] == "adj"))
        throw ParseError("expected: gen <name> [adj <name>]", st.line, st.col);
      if (!detail::valid_generator_name(toks[1]) ||
          (toks.size() == 4 && !detail::valid_generator_name(toks[3])))
        throw ParseError("invalid generator name", st.line, st.col);
      int id = static_cast<int>(gens.size());
      if (toks.size() == 2) {
        gens.push_back({toks[1], id, id});
      } else {
        if (toks[1] == toks[3])
          throw ParseError("adjoint partner must differ; omit 'adj' for a self-adjoint generator",
                           st.line, st.col);
        gens.push_back({toks[1], id, id + 1});
        gens.push_back({toks[3], id + 1, id});
      }
    } else if (head == "rule") {
      rule_stmts.push_back(st);
    } else if (head == "gram") {
      if (have_gram) throw ParseError("duplicate gram statement", st.line, st.col);
      have_gram = true;
      for (size_t k = 1; k < toks.size(); ++k)
        gram.push_back(detail::parse_complex_literal(toks[k], st.line, st.col));
    } else {
      throw ParseError("unknown statement '" + head + "'", st.line, st.col);
    }
  }

  if (!have_class)
    throw ParseError("missing class statement", 1, 1);

  if (cls != AlgebraClass::custom && (!gens.empty() || !rule_stmts.empty()))
    throw ParseError("gen/rule statements are only valid for class custom", 1, 1);
  if (cls != AlgebraClass::gram_boltzmann && have_gram)
    throw ParseError("gram statement is only valid for class gram_boltzmann", 1, 1);

  try {
    switch (cls) {
      case AlgebraClass::boltzmann:
        return Presentation::boltzmann(modes);
      case AlgebraClass::ccr:
        return Presentation::ccr(modes, params.count("h") ? params.at("h") : 1.0);
      case AlgebraClass::gram_boltzmann:
        if (!have_gram)
          throw ParseError("gram_boltzmann requires a gram statement", 1, 1);
        return Presentation::gram_boltzmann(modes, gram);
      case AlgebraClass::commutative:
        return Presentation::commutative(modes);
      case AlgebraClass::custom:
        break;
    }
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(e.what(), 1, 1);
  }

  if (gens.empty())
    throw ParseError("custom presentation declares no generators", 1, 1);

  // Resolve rule text against a rule-free copy of the same generators, then
  // rebuild with the rules attached. Generator ids are unchanged.
  PresentationPtr prelim;
  try {
    prelim = Presentation::custom(gens, {}, params);
  } catch (const Error& e) {
    throw ParseError(e.what(), 1, 1);
  }
  std::vector<RewriteRule> rules;
  for (const Statement& st : rule_stmts) {
    size_t arrow = st.text.find("->");
    if (arrow == std::string::npos)
      throw ParseError("rule is missing '->'", st.line, st.col);
    std::vector<std::string> lhs_toks =
        detail::words_of(std::string_view(st.text).substr(4, arrow - 4));
    if (lhs_toks.size() != 2)
      throw ParseError("rule left side must have exactly two letters", st.line,
                       st.col);
    RewriteRule r;
    r.lhs = {detail::resolve_letter(lhs_toks[0], prelim, st.line, st.col),
             detail::resolve_letter(lhs_toks[1], prelim, st.line, st.col)};
    detail::ExprParser ep{std::string_view(st.text).substr(arrow + 2), 0,
                          st.line, st.col + static_cast<int>(arrow) + 2, prelim};
    Polynomial rhs = ep.run();
    for (const auto& [w, c] : rhs.terms()) {
      if (w.size() > 2)
        throw ParseError("rule right side exceeds degree 2", st.line, st.col);
      r.rhs[w] = c;
    }
    rules.push_back(std::move(r));
  }

  try {
    return Presentation::custom(std::move(gens), std::move(rules),
                                std::move(params));
  } catch (const Error& e) {
    throw ParseError(e.what(), 1, 1);
  }
}

}  // namespace ncq
