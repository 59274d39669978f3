#include "slent/normalize.hpp"

#include <algorithm>

namespace slent {

size_t EqClassStore::id_of(const LocTerm& t) const {
  auto it = ids_.find(t);
  if (it != ids_.end()) return it->second;
  size_t id = terms_.size();
  terms_.push_back(t);
  parent_.push_back(id);
  ids_.emplace(t, id);
  return id;
}

size_t EqClassStore::find(size_t i) const {
  while (parent_[i] != i) {
    parent_[i] = parent_[parent_[i]];
    i = parent_[i];
  }
  return i;
}

void EqClassStore::add_eq(const LocTerm& a, const LocTerm& b) {
  size_t ra = find(id_of(a));
  size_t rb = find(id_of(b));
  if (ra == rb) return;
  // representative: prefer nil, else the smaller term, for determinism
  size_t keep = ra, drop = rb;
  if (terms_[rb] < terms_[ra]) std::swap(keep, drop);
  parent_[drop] = keep;
  // migrate disequality edges
  std::set<std::pair<size_t, size_t>> moved;
  for (auto [x, y] : neqs_) {
    x = find(x);
    y = find(y);
    if (x == y) contradictory_ = true;
    if (x > y) std::swap(x, y);
    moved.insert({x, y});
  }
  neqs_ = std::move(moved);
}

void EqClassStore::add_neq(const LocTerm& a, const LocTerm& b) {
  size_t ra = find(id_of(a));
  size_t rb = find(id_of(b));
  if (ra == rb) {
    contradictory_ = true;
    return;
  }
  if (ra > rb) std::swap(ra, rb);
  neqs_.insert({ra, rb});
}

LocTerm EqClassStore::rep(const LocTerm& t) const {
  auto it = ids_.find(t);
  if (it == ids_.end()) return t;
  return terms_[find(it->second)];
}

bool EqClassStore::entails_eq(const LocTerm& a, const LocTerm& b) const {
  if (a == b) return true;
  auto ia = ids_.find(a);
  auto ib = ids_.find(b);
  if (ia == ids_.end() || ib == ids_.end()) return false;
  return find(ia->second) == find(ib->second);
}

bool EqClassStore::entails_neq(const LocTerm& a, const LocTerm& b) const {
  auto ia = ids_.find(a);
  auto ib = ids_.find(b);
  if (ia == ids_.end() || ib == ids_.end()) return false;
  size_t ra = find(ia->second);
  size_t rb = find(ib->second);
  if (ra == rb) return false;
  if (ra > rb) std::swap(ra, rb);
  return neqs_.count({ra, rb}) != 0;
}

SaturationResult saturate(const SymbolicHeap& h) {
  SaturationResult result;
  EqClassStore& store = result.store;

  for (const auto& e : h.pure.loc_eqs) store.add_eq(e.lhs, e.rhs);

  // (a) every cell root is allocated, hence non-nil
  // (b) distinct cells occupy distinct locations
  std::vector<LocTerm> roots;
  for (const auto& a : h.spatial)
    if (const auto* p = std::get_if<PointsTo>(&a)) roots.push_back(p->root);
  for (const auto& r : roots) store.add_neq(r, LocTerm::nil());
  for (size_t i = 0; i < roots.size(); ++i)
    for (size_t j = i + 1; j < roots.size(); ++j) store.add_neq(roots[i], roots[j]);

  for (const auto& n : h.pure.loc_neqs) store.add_neq(n.lhs, n.rhs);

  if (store.contradictory()) {
    result.contradiction = true;
    return result;
  }

  // (d) rewrite to representatives
  Subst rewrite;
  std::set<Var> vars = free_vars(h);
  for (const auto& b : h.exists) vars.insert(b);
  for (const auto& v : vars) {
    if (v.sort != Sort::Loc) continue;
    LocTerm r = store.rep(LocTerm::of(v));
    if (!(r == LocTerm::of(v))) rewrite.bind(v, Term(r));
  }

  SymbolicHeap out;
  out.exists = h.exists;
  out.spatial = rewrite(h.spatial);
  PureFormula rewritten = rewrite(h.pure);
  // keep only informative pure atoms; re-derive the full (dis)equality set
  for (const auto& e : rewritten.loc_eqs)
    if (!(e.lhs == e.rhs)) out.pure.add_loc_eq(e.lhs, e.rhs);
  out.pure.data_atoms = rewritten.data_atoms;

  // two cells sharing a representative root violate separation
  std::set<LocTerm> seen;
  for (const auto& a : out.spatial) {
    if (const auto* p = std::get_if<PointsTo>(&a)) {
      if (p->root.is_nil() || !seen.insert(p->root).second) {
        result.contradiction = true;
        return result;
      }
    }
  }

  // materialize derived disequalities on representatives
  std::set<LocTerm> louts;
  auto note = [&](const LocTerm& t) { louts.insert(store.rep(t)); };
  for (const auto& v : vars)
    if (v.sort == Sort::Loc) note(LocTerm::of(v));
  note(LocTerm::nil());
  for (const auto& a : louts)
    for (const auto& b : louts)
      if (a < b && store.entails_neq(a, b)) out.pure.add_loc_neq(a, b);

  result.heap = std::move(out);
  return result;
}

bool entails_pure_loc(const EqClassStore& store, const LocRel& goal, bool is_eq) {
  if (store.contradictory()) return true;
  if (is_eq) return store.entails_eq(goal.lhs, goal.rhs);
  if (store.entails_eq(goal.lhs, goal.rhs)) return false;
  return store.entails_neq(goal.lhs, goal.rhs);
}

}  // namespace slent
