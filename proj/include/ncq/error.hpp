#pragma once

#include <stdexcept>
#include <string>

namespace ncq {

// Base class for everything this library throws on misuse: bad input text,
// incompatible operands, exhausted budgets. Numerical outcomes (feasible /
// infeasible / undecided) are data, not exceptions.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line, int column)
      : Error(what + " at line " + std::to_string(line) + ", column " +
              std::to_string(column)),
        line(line),
        column(column) {}
  int line;
  int column;
};

// Rewriting ran past its step budget (possible with custom rule sets that
// cycle). Carries the tail of the reduction history for diagnosis.
class RewriteBudgetError : public Error {
 public:
  RewriteBudgetError(const std::string& what, std::string history)
      : Error(what), history(std::move(history)) {}
  std::string history;
};

}  // namespace ncq
