#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "slent/ast.hpp"

namespace slent {

struct FrontendError : SlentError {
  enum class Kind { Syntax, Sort, UnknownIdentifier, RhsLocationBinder };

  FrontendError(Kind k, int line, int col, const std::string& msg)
      : SlentError(msg), kind(k), line(line), col(col) {}

  Kind kind;
  int line;
  int col;
};

struct Query {
  Formula lhs;  // quantifier-free after skolemization
  Formula rhs;  // data-sorted binders only, one spatial occurrence per binder
};

struct Problem {
  std::map<std::string, Sort> field_decls;  // Loc or Int valued fields
  DefMap defs;
  std::optional<Query> query;
  std::map<std::string, std::string> options;
};

/// Parses a problem file. Location existentials on the left-hand side are
/// replaced by fresh free variables; right-hand-side binders occurring in
/// more than one spatial position are split into fresh binders tied back by
/// equalities. Fresh names carry the reserved '%' prefix.
Problem parse_problem(const std::string& text);

/// Canonical printer; parse_problem(print_problem(p)) is alpha-equivalent
/// to p. Definitions sorted by name, conjuncts and atoms in canonical order,
/// two-space indent.
std::string print_problem(const Problem& p);

std::string print_heap(const SymbolicHeap& h);

/// Structural equality modulo binder names (binder order significant),
/// conjunct order and spatial order insensitive.
bool alpha_equivalent(const SymbolicHeap& a, const SymbolicHeap& b);
bool alpha_equivalent(const Problem& a, const Problem& b);

}  // namespace slent
