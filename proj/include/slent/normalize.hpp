#pragma once

#include "slent/ast.hpp"

namespace slent {

/// Union-find over location terms plus disequality edges between class
/// representatives. Contradictory when some class must be both equal and
/// disequal to another, or when nil or a shared cell root gets merged in.
class EqClassStore {
 public:
  void add_eq(const LocTerm& a, const LocTerm& b);
  void add_neq(const LocTerm& a, const LocTerm& b);

  LocTerm rep(const LocTerm& t) const;
  bool contradictory() const { return contradictory_; }

  bool entails_eq(const LocTerm& a, const LocTerm& b) const;
  bool entails_neq(const LocTerm& a, const LocTerm& b) const;

 private:
  size_t id_of(const LocTerm& t) const;
  size_t find(size_t i) const;

  mutable std::vector<LocTerm> terms_;
  mutable std::map<LocTerm, size_t> ids_;
  mutable std::vector<size_t> parent_;
  std::set<std::pair<size_t, size_t>> neqs_;  // by root id, ordered pairs
  bool contradictory_ = false;
};

struct SaturationResult {
  bool contradiction = false;
  SymbolicHeap heap;    // rewritten to class representatives
  EqClassStore store;   // closure of the saturated pure part
};

/// Saturates a quantifier-free symbolic heap with the (dis)equalities implied
/// by separation: cell roots are non-nil and pairwise distinct, equalities
/// are closed under congruence, and all atoms are rewritten to class
/// representatives. Detects contradictions (including two cells sharing a
/// root after closure).
SaturationResult saturate(const SymbolicHeap& h);

/// True iff the goal follows from the store's closure.
bool entails_pure_loc(const EqClassStore& store, const LocRel& goal, bool is_eq);

}  // namespace slent
