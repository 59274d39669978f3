#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "slent/ast.hpp"
#include "slent/lemmas.hpp"

namespace slent {

/// Enumeration limits for the bounded-model search. Location 0 is nil.
struct Bounds {
  int max_cells = 4;
  int loc_universe = 5;  // allocatable locations 1..loc_universe
  std::vector<long long> data_domain = {0, 1, 2};
  int max_multiplicity = 4;

  std::string to_string() const;
};

/// Parses "cells=4,locs=5,data=0..2,mult=4".
std::optional<Bounds> parse_bounds(const std::string& text);

struct Value {
  Sort sort = Sort::Loc;
  long long scalar = 0;              // Loc id or Int value
  std::vector<long long> mset;       // sorted

  friend auto operator<=>(const Value&, const Value&) = default;
};

using Cell = std::map<std::string, Value>;

/// An explicit stack and heap. The heap maps allocated locations to cells;
/// a location carrying a data field always carries a pointer field, and nil
/// is never allocated.
struct BoundedModel {
  std::map<Var, Value> stack;
  std::map<int, Cell> heap;
};

std::string print_model(const BoundedModel& m);

class Oracle {
 public:
  Oracle(const DefMap& defs, Bounds bounds) : defs_(defs), bounds_(std::move(bounds)) {}

  /// Least-fixed-point satisfaction; existentials of h are enumerated over
  /// the bounded value space.
  bool satisfies(const BoundedModel& m, const SymbolicHeap& h) const;

  /// First model (in enumeration order) satisfying some LHS disjunct while
  /// no RHS disjunct holds under any enumeration of its data binders.
  /// Absence means valid up to the bounds only.
  std::optional<BoundedModel> refute_entailment(const Formula& lhs, const Formula& rhs) const;

  /// Refutation specialized to a lemma: premise existentials enumerate on
  /// the left, the conclusion is a single predicate atom.
  std::optional<BoundedModel> check_lemma(const Lemma& l) const;

  const Bounds& bounds() const { return bounds_; }

  /// Sub-heap splits tried while checking separating conjunctions
  /// (exhaustiveness is asserted in tests).
  mutable long long partition_visits = 0;

 private:
  const DefMap& defs_;
  Bounds bounds_;
};

inline bool satisfies(const BoundedModel& m, const SymbolicHeap& h, const DefMap& defs,
                      const Bounds& b) {
  return Oracle(defs, b).satisfies(m, h);
}

}  // namespace slent
