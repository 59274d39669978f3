#include <algorithm>
#include <sstream>

#include "slent/problem.hpp"

namespace slent {

namespace {

std::string binder_list(const std::vector<Var>& binders) {
  std::string s = "(exists (";
  for (size_t i = 0; i < binders.size(); ++i) {
    if (i) s += " ";
    s += "(" + binders[i].name + " " + sort_name(binders[i].sort) + ")";
  }
  return s + "))";
}

std::string pure_clause(const PureFormula& pure) {
  PureFormula p = pure;
  p.sort_canonical();
  std::string s = "(pure";
  for (const auto& e : p.loc_eqs) s += " " + show(e, true);
  for (const auto& n : p.loc_neqs) s += " " + show(n, false);
  for (const auto& d : p.data_atoms) s += " " + show(d);
  return s + ")";
}

std::string spatial_clause(const std::vector<SpatialAtom>& spatial) {
  std::vector<SpatialAtom> atoms = spatial;
  std::sort(atoms.begin(), atoms.end(), spatial_less);
  std::string s = "(spatial";
  if (atoms.empty()) s += " emp";
  for (const auto& a : atoms) s += " " + show(a);
  return s + ")";
}

SymbolicHeap canonical_heap(const SymbolicHeap& h) {
  // binder names normalized in declaration order, conjuncts/atoms sorted
  Subst renaming;
  SymbolicHeap out;
  int i = 0;
  for (const auto& b : h.exists) {
    Var nb{"%b" + std::to_string(i++), b.sort};
    renaming.bind(b, Term::of(nb));
    out.exists.push_back(nb);
  }
  out.pure = renaming(h.pure);
  out.spatial = renaming(h.spatial);
  out.pure.sort_canonical();
  // loc equalities are kept orientation-sensitive in the AST; canonicalize
  // the orientation for comparison purposes
  for (auto& e : out.pure.loc_eqs)
    if (e.rhs < e.lhs) std::swap(e.lhs, e.rhs);
  for (auto& n : out.pure.loc_neqs)
    if (n.rhs < n.lhs) std::swap(n.lhs, n.rhs);
  out.pure.sort_canonical();
  std::sort(out.spatial.begin(), out.spatial.end(), spatial_less);
  return out;
}

}  // namespace

std::string print_heap(const SymbolicHeap& h) {
  std::string s = "(heap " + binder_list(h.exists);
  s += "\n      " + pure_clause(h.pure);
  s += "\n      " + spatial_clause(h.spatial) + ")";
  return s;
}

std::string print_problem(const Problem& p) {
  std::ostringstream out;
  for (const auto& [name, sort] : p.field_decls)
    out << "(declare-field " << name << " " << sort_name(sort) << ")\n";
  for (const auto& [key, value] : p.options) out << "(set-option " << key << " \"" << value << "\")\n";
  for (const auto& [name, def] : p.defs) {
    out << "(define-pred " << name << " (";
    for (size_t i = 0; i < def.params.size(); ++i) {
      if (i) out << " ";
      out << "(" << def.params[i].name << " " << sort_name(def.params[i].sort) << ")";
    }
    out << ")";
    for (const auto& rule : def.rules) {
      out << "\n  (rule " << binder_list(rule.exists);
      out << "\n    " << pure_clause(rule.pure);
      out << "\n    " << spatial_clause(rule.spatial) << ")";
    }
    out << ")\n";
    if (def.declared_roles) {
      const auto& r = *def.declared_roles;
      out << "(roles " << name << " (source " << r.source_loc << " " << r.source_data << ")"
          << " (hole " << r.hole_loc << " " << r.hole_data << "))\n";
    }
  }
  if (p.query) {
    out << "(check-entail\n  (lhs";
    for (const auto& d : p.query->lhs.disjuncts) out << "\n    " << print_heap(d);
    out << ")\n  (rhs";
    for (const auto& d : p.query->rhs.disjuncts) out << "\n    " << print_heap(d);
    out << "))\n";
  }
  return out.str();
}

bool alpha_equivalent(const SymbolicHeap& a, const SymbolicHeap& b) {
  return compare(canonical_heap(a), canonical_heap(b)) == 0;
}

bool alpha_equivalent(const Problem& a, const Problem& b) {
  if (a.field_decls != b.field_decls) return false;
  if (a.options != b.options) return false;
  if (a.defs.size() != b.defs.size()) return false;
  for (const auto& [name, da] : a.defs) {
    auto it = b.defs.find(name);
    if (it == b.defs.end()) return false;
    const auto& db = it->second;
    if (da.params.size() != db.params.size()) return false;
    if (da.declared_roles != db.declared_roles) return false;
    if (da.rules.size() != db.rules.size()) return false;
    // parameters must agree up to renaming: compare rules with params mapped
    Subst pa, pb;
    std::vector<Var> canon;
    for (size_t i = 0; i < da.params.size(); ++i) {
      if (da.params[i].sort != db.params[i].sort) return false;
      Var c{"%p" + std::to_string(i), da.params[i].sort};
      canon.push_back(c);
      pa.bind(da.params[i], Term::of(c));
      pb.bind(db.params[i], Term::of(c));
    }
    for (size_t r = 0; r < da.rules.size(); ++r) {
      SymbolicHeap ha{da.rules[r].exists, pa(da.rules[r].pure), pa(da.rules[r].spatial)};
      SymbolicHeap hb{db.rules[r].exists, pb(db.rules[r].pure), pb(db.rules[r].spatial)};
      if (!alpha_equivalent(ha, hb)) return false;
    }
  }
  bool qa = a.query.has_value(), qb = b.query.has_value();
  if (qa != qb) return false;
  if (!qa) return true;
  auto side = [](const Formula& fa, const Formula& fb) {
    if (fa.disjuncts.size() != fb.disjuncts.size()) return false;
    for (size_t i = 0; i < fa.disjuncts.size(); ++i)
      if (!alpha_equivalent(fa.disjuncts[i], fb.disjuncts[i])) return false;
    return true;
  };
  return side(a.query->lhs, b.query->lhs) && side(a.query->rhs, b.query->rhs);
}

}  // namespace slent
