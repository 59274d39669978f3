#include "slent/lemmas.hpp"

#include <algorithm>
#include <numeric>

namespace slent {

const char* lemma_family_name(LemmaFamily f) {
  switch (f) {
    case LemmaFamily::BaseRule: return "base";
    case LemmaFamily::InductiveRule: return "inductive";
    case LemmaFamily::Composition: return "composition";
    case LemmaFamily::Completion: return "completion";
    case LemmaFamily::Stronger: return "stronger";
    case LemmaFamily::Contraction: return "contraction";
  }
  return "?";
}

namespace {

Var fresh_named(std::string base, Sort sort, std::set<std::string>& taken) {
  std::string name = std::move(base);
  while (taken.count(name)) name += "2";
  taken.insert(name);
  return Var{name, sort};
}

bool var_term_is(const Term& t, const Var& v) {
  auto tv = t.as_var();
  return tv && *tv == v;
}

std::optional<Var> term_var(const DataTerm& t) {
  if (t.kind() == DataTerm::Kind::VarRef) return t.var_ref();
  return std::nullopt;
}

int param_index(const InductiveDef& def, const Var& v) {
  for (size_t i = 0; i < def.params.size(); ++i)
    if (def.params[i] == v) return static_cast<int>(i);
  return -1;
}

/// The body of the base rule must be exactly source = hole for both pairs.
bool base_rule_matches(const Rule& base, const InductiveDef& def, const RoleAssignment& r) {
  if (base.kind() != RuleKind::BaseEmpty) return false;
  if (!base.exists.empty()) return false;
  if (!base.pure.loc_neqs.empty()) return false;
  if (base.pure.loc_eqs.size() != 1 || base.pure.data_atoms.size() != 1) return false;
  const LocRel& eq = base.pure.loc_eqs[0];
  if (!eq.lhs.is_var() || !eq.rhs.is_var()) return false;
  LocTerm src = LocTerm::of(def.params[r.source_loc]);
  LocTerm hole = LocTerm::of(def.params[r.hole_loc]);
  bool loc_ok = (eq.lhs == src && eq.rhs == hole) || (eq.lhs == hole && eq.rhs == src);
  if (!loc_ok) return false;
  const DataAtom& d = base.pure.data_atoms[0];
  if (d.kind != DataAtom::Kind::MsetEq && !(d.kind == DataAtom::Kind::IntCmp && d.op == CmpOp::Eq))
    return false;
  auto lv = term_var(d.lhs);
  auto rv = term_var(d.rhs);
  if (!lv || !rv) return false;
  Var sd = def.params[r.source_data];
  Var hd = def.params[r.hole_data];
  return (*lv == sd && *rv == hd) || (*lv == hd && *rv == sd);
}

/// The hole-data parameter may only appear as the recursive atom's hole
/// argument.
bool hole_data_linear(const InductiveDef& def, int hd) {
  const Var& h = def.params[hd];
  for (const auto& rule : def.rules) {
    if (rule.kind() != RuleKind::Inductive) continue;
    if (free_vars(rule.pure).count(h)) return false;
    for (const auto& atom : rule.spatial) {
      if (const auto* p = std::get_if<PointsTo>(&atom)) {
        if (free_vars(SpatialAtom(*p)).count(h)) return false;
      } else {
        const auto& pa = std::get<PredAtom>(atom);
        for (size_t i = 0; i < pa.args.size(); ++i) {
          if (pa.pred == def.name && static_cast<int>(i) == hd) continue;
          if (free_vars(pa.args[i]).count(h)) return false;
        }
      }
    }
  }
  return true;
}

}  // namespace

std::vector<RoleAssignment> infer_roles(const InductiveDef& def) {
  const Rule* base = nullptr;
  int base_empty = 0;
  for (const auto& r : def.rules) {
    if (r.kind() == RuleKind::BaseEmpty) {
      base = &r;
      ++base_empty;
    }
  }
  if (base_empty != 1) return {};
  if (def.params.empty() || def.params[0].sort != Sort::Loc) return {};
  if (!base->exists.empty() || !base->pure.loc_neqs.empty()) return {};
  if (base->pure.loc_eqs.size() != 1 || base->pure.data_atoms.size() != 1) return {};

  const LocRel& eq = base->pure.loc_eqs[0];
  if (!eq.lhs.is_var() || !eq.rhs.is_var()) return {};
  int sl = 0;
  Var src = def.params[0];
  Var other;
  if (eq.lhs.var() == src)
    other = eq.rhs.var();
  else if (eq.rhs.var() == src)
    other = eq.lhs.var();
  else
    return {};
  int hl = param_index(def, other);
  if (hl <= 0) return {};

  const DataAtom& d = base->pure.data_atoms[0];
  if (d.kind != DataAtom::Kind::MsetEq && !(d.kind == DataAtom::Kind::IntCmp && d.op == CmpOp::Eq))
    return {};
  auto lv = term_var(d.lhs);
  auto rv = term_var(d.rhs);
  if (!lv || !rv || *lv == *rv) return {};
  int ia = param_index(def, *lv);
  int ib = param_index(def, *rv);
  if (ia < 0 || ib < 0 || ia == sl || ib == sl || ia == hl || ib == hl) return {};

  auto build = [&](int sd, int hd) {
    RoleAssignment r;
    r.source_loc = sl;
    r.source_data = sd;
    r.hole_loc = hl;
    r.hole_data = hd;
    std::set<int> used{sl, sd, hl, hd};
    for (int i = 0; i < static_cast<int>(def.params.size()); ++i)
      if (!used.count(i)) r.statics.push_back(i);
    return r;
  };
  std::vector<RoleAssignment> candidates{build(ia, ib), build(ib, ia)};
  std::vector<RoleAssignment> linear;
  for (const auto& c : candidates)
    if (hole_data_linear(def, c.hole_data)) linear.push_back(c);
  std::vector<RoleAssignment> out = linear.empty() ? candidates : linear;
  if (out.size() == 2) {
    // tie: take the layout with the source-data parameter first
    std::vector<RoleAssignment> one{out[0].source_data < out[1].source_data ? out[0] : out[1]};
    // both survive the linearity filter only when no inductive rule
    // distinguishes them, so one representative suffices
    if (linear.size() == 2 || linear.empty()) out = one;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

CompReport is_syntactically_compositional(const InductiveDef& def, const RoleAssignment& roles) {
  CompReport report;
  report.roles = roles;
  auto violate = [&](size_t idx, const char* clause, const std::string& msg) {
    report.violations.push_back({idx, clause, msg});
  };
  constexpr size_t kDefLevel = static_cast<size_t>(-1);

  int n = static_cast<int>(def.params.size());
  if (roles.source_loc < 0 || roles.source_loc >= n || roles.hole_loc < 0 || roles.hole_loc >= n ||
      roles.source_data < 0 || roles.source_data >= n || roles.hole_data < 0 ||
      roles.hole_data >= n) {
    violate(kDefLevel, "base-rule-shape", "role indices out of range");
    return report;
  }

  size_t base_count = 0;
  const Rule* base = nullptr;
  size_t base_idx = 0;
  size_t inductive_count = 0;
  for (size_t i = 0; i < def.rules.size(); ++i) {
    if (def.rules[i].kind() == RuleKind::Inductive) {
      ++inductive_count;
    } else {
      ++base_count;
      base = &def.rules[i];
      base_idx = i;
    }
  }
  if (base_count != 1) {
    violate(kDefLevel, "base-rule-shape", "exactly one base rule required");
  } else if (!base_rule_matches(*base, def, roles)) {
    violate(base_idx, "base-rule-shape",
            "base rule is not source = hole for the location and data pairs");
  }
  if (inductive_count == 0) violate(kDefLevel, "no-inductive-rule", "at least one inductive rule required");

  const Var b1 = def.params[roles.hole_loc];
  const Var b2 = def.params[roles.hole_data];

  for (size_t idx = 0; idx < def.rules.size(); ++idx) {
    const Rule& rule = def.rules[idx];
    if (rule.kind() != RuleKind::Inductive) continue;

    std::vector<const PointsTo*> cells;
    std::vector<const PredAtom*> preds;
    for (const auto& a : rule.spatial) {
      if (const auto* p = std::get_if<PointsTo>(&a))
        cells.push_back(p);
      else
        preds.push_back(&std::get<PredAtom>(a));
    }

    std::vector<const PredAtom*> recursive, others;
    for (const auto* pa : preds) {
      if (pa->pred == def.name && pa->args.size() == def.params.size() &&
          var_term_is(pa->args[roles.hole_loc], b1) && var_term_is(pa->args[roles.hole_data], b2))
        recursive.push_back(pa);
      else
        others.push_back(pa);
    }
    if (recursive.empty()) {
      violate(idx, "no-recursive-atom",
              "no recursive atom carries the hole parameters " + b1.name + ", " + b2.name);
      continue;
    }
    if (recursive.size() > 1) {
      violate(idx, "multiple-recursive-atoms",
              "hole parameters occur in more than one recursive atom");
      continue;
    }
    const PredAtom& rec = *recursive[0];

    for (int s : roles.statics) {
      if (!var_term_is(rec.args[s], def.params[s]))
        violate(idx, "statics-mismatch",
                "recursive atom does not pass static parameter " + def.params[s].name + " through");
    }

    std::set<Var> exists_set(rule.exists.begin(), rule.exists.end());
    for (int pos : {roles.source_loc, roles.source_data}) {
      auto v = rec.args[pos].as_var();
      if (!v || !exists_set.count(*v)) {
        violate(idx, "source-args-not-existential",
                "recursive atom's source arguments must be existential variables");
      } else if (*v == b1 || *v == b2) {
        violate(idx, "hole-in-gamma", "hole parameter used as a recursive source argument");
      }
    }

    if (free_vars(rule.pure).count(b1) || free_vars(rule.pure).count(b2))
      violate(idx, "hole-in-pure", "hole parameter occurs in the pure part");
    for (const auto* c : cells)
      if (free_vars(SpatialAtom(*c)).count(b1) || free_vars(SpatialAtom(*c)).count(b2))
        violate(idx, "hole-in-root", "hole parameter occurs in the points-to part");
    for (const auto* o : others)
      if (free_vars(SpatialAtom(*o)).count(b1) || free_vars(SpatialAtom(*o)).count(b2))
        violate(idx, "hole-in-preds", "hole parameter occurs in a non-recursive predicate atom");
    // non-hole argument positions of the recursive atom itself
    for (size_t i = 0; i < rec.args.size(); ++i) {
      if (static_cast<int>(i) == roles.hole_loc || static_cast<int>(i) == roles.hole_data) continue;
      if (static_cast<int>(i) == roles.source_loc || static_cast<int>(i) == roles.source_data)
        continue;  // gamma checked above
      if (free_vars(rec.args[i]).count(b1) || free_vars(rec.args[i]).count(b2))
        violate(idx, "hole-in-preds", "hole parameter occurs in a static argument position");
    }
  }

  report.ok = report.violations.empty();
  return report;
}

CompReport classify_compositional(const InductiveDef& def) {
  std::vector<RoleAssignment> candidates;
  if (def.declared_roles) {
    candidates.push_back(*def.declared_roles);
  } else {
    candidates = infer_roles(def);
  }
  if (candidates.empty()) {
    CompReport report;
    report.violations.push_back(
        {static_cast<size_t>(-1), "base-rule-shape",
         "no source/hole role assignment matches the base rule"});
    return report;
  }
  CompReport first;
  bool have_first = false;
  for (const auto& c : candidates) {
    CompReport r = is_syntactically_compositional(def, c);
    if (r.ok) return r;
    if (!have_first) {
      first = r;
      have_first = true;
    }
  }
  return first;
}

std::vector<RoleAssignment> compositional_assignments(const InductiveDef& def);

std::vector<RoleAssignment> compositional_assignments(const InductiveDef& def) {
  std::vector<RoleAssignment> out;
  std::vector<RoleAssignment> candidates;
  if (def.declared_roles)
    candidates.push_back(*def.declared_roles);
  else
    candidates = infer_roles(def);
  for (const auto& c : candidates)
    if (is_syntactically_compositional(def, c).ok) out.push_back(c);
  return out;
}

// ---------------------------------------------------------------------------
// Canonical rule keys

namespace {

std::string render_body(const PureFormula& pure, const std::vector<SpatialAtom>& spatial) {
  PureFormula p = pure;
  for (auto& e : p.loc_eqs)
    if (e.rhs < e.lhs) std::swap(e.lhs, e.rhs);
  for (auto& n : p.loc_neqs)
    if (n.rhs < n.lhs) std::swap(n.lhs, n.rhs);
  p.sort_canonical();
  std::vector<SpatialAtom> atoms = spatial;
  std::sort(atoms.begin(), atoms.end(), spatial_less);
  std::string s = "[";
  for (const auto& e : p.loc_eqs) s += show(e, true);
  for (const auto& n : p.loc_neqs) s += show(n, false);
  for (const auto& d : p.data_atoms) s += show(d);
  s += "|";
  for (const auto& a : atoms) s += show(a);
  return s + "]";
}

}  // namespace

std::string canonical_rule_key(const std::vector<Var>& exists, const PureFormula& pure,
                               const std::vector<SpatialAtom>& spatial) {
  size_t n = exists.size();
  auto render_with = [&](const std::vector<size_t>& order) {
    Subst ren;
    std::string sig = "(";
    for (size_t i = 0; i < order.size(); ++i) {
      const Var& v = exists[order[i]];
      ren.bind(v, Term::of(Var{"%e" + std::to_string(i), v.sort}));
      sig += sort_name(v.sort);
      sig += ",";
    }
    sig += ")";
    return sig + render_body(ren(pure), ren(spatial));
  };
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (n > 8) return render_with(order);
  std::string best = render_with(order);
  while (std::next_permutation(order.begin(), order.end())) {
    std::string s = render_with(order);
    if (s < best) best = s;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Lemma construction

std::vector<Lemma> rules_as_lemmas(const InductiveDef& def) {
  std::vector<Lemma> base, inductive;
  for (size_t i = 0; i < def.rules.size(); ++i) {
    const Rule& rule = def.rules[i];
    Lemma l;
    l.family = rule.kind() == RuleKind::Inductive ? LemmaFamily::InductiveRule
                                                  : LemmaFamily::BaseRule;
    l.id = def.name + (l.family == LemmaFamily::BaseRule ? ".base" : ".ind") + std::to_string(i);
    l.premise_exists = rule.exists;
    l.premise_pure = rule.pure;
    for (const auto& a : rule.spatial) {
      if (std::holds_alternative<PointsTo>(a))
        l.premise_root.push_back(a);
      else
        l.premise_rest.push_back(a);
    }
    l.conclusion.pred = def.name;
    for (const auto& p : def.params) l.conclusion.args.push_back(Term::of(p));
    (l.family == LemmaFamily::BaseRule ? base : inductive).push_back(std::move(l));
  }
  base.insert(base.end(), inductive.begin(), inductive.end());
  return base;
}

namespace {

struct LemmaVars {
  Var src_loc, src_data;    // alpha
  Var hole_loc, hole_data;  // beta (premise existentials)
  Var far_loc, far_data;    // gamma
  std::set<std::string> taken;
};

LemmaVars lemma_vars(const InductiveDef& def, const RoleAssignment& r) {
  LemmaVars v;
  for (const auto& p : def.params) v.taken.insert(p.name);
  v.src_loc = def.params[r.source_loc];
  v.src_data = def.params[r.source_data];
  v.hole_loc = def.params[r.hole_loc];
  v.hole_data = def.params[r.hole_data];
  v.far_loc = fresh_named(v.hole_loc.name + "2", Sort::Loc, v.taken);
  v.far_data = fresh_named(v.hole_data.name + "2", v.hole_data.sort, v.taken);
  return v;
}

PredAtom atom_with(const InductiveDef& def, const RoleAssignment& r, const Term& sl,
                   const Term& sd, const Term& hl, const Term& hd) {
  PredAtom a;
  a.pred = def.name;
  a.args.resize(def.params.size());
  for (size_t i = 0; i < def.params.size(); ++i) a.args[i] = Term::of(def.params[i]);
  a.args[r.source_loc] = sl;
  a.args[r.source_data] = sd;
  a.args[r.hole_loc] = hl;
  a.args[r.hole_data] = hd;
  return a;
}

}  // namespace

Lemma make_composition_lemma(const InductiveDef& def, const RoleAssignment& r) {
  LemmaVars v = lemma_vars(def, r);
  Lemma l;
  l.family = LemmaFamily::Composition;
  l.id = def.name + ".comp";
  l.premise_exists = {v.hole_loc, v.hole_data};
  l.premise_root.push_back(atom_with(def, r, Term::of(v.src_loc), Term::of(v.src_data),
                                     Term::of(v.hole_loc), Term::of(v.hole_data)));
  l.premise_rest.push_back(atom_with(def, r, Term::of(v.hole_loc), Term::of(v.hole_data),
                                     Term::of(v.far_loc), Term::of(v.far_data)));
  l.conclusion = atom_with(def, r, Term::of(v.src_loc), Term::of(v.src_data),
                           Term::of(v.far_loc), Term::of(v.far_data));
  return l;
}

// ---------------------------------------------------------------------------
// Completion

std::optional<CompletionResult> detect_completion(const InductiveDef& p,
                                                  const RoleAssignment& roles,
                                                  const InductiveDef& pp) {
  if (!is_syntactically_compositional(p, roles).ok) return std::nullopt;

  std::vector<int> keep;
  for (int i = 0; i < static_cast<int>(p.params.size()); ++i)
    if (i != roles.hole_loc && i != roles.hole_data) keep.push_back(i);
  if (pp.params.size() != keep.size()) return std::nullopt;
  for (size_t j = 0; j < keep.size(); ++j)
    if (pp.params[j].sort != p.params[keep[j]].sort) return std::nullopt;

  int adj_sl = -1, adj_sd = -1;
  for (size_t j = 0; j < keep.size(); ++j) {
    if (keep[j] == roles.source_loc) adj_sl = static_cast<int>(j);
    if (keep[j] == roles.source_data) adj_sd = static_cast<int>(j);
  }

  // base rule of the completion: source pair pinned to ground constants
  const Rule* base = nullptr;
  size_t base_count = 0, ind_count_pp = 0;
  for (const auto& r : pp.rules) {
    if (r.kind() == RuleKind::Inductive) {
      ++ind_count_pp;
    } else {
      base = &r;
      ++base_count;
    }
  }
  if (base_count != 1 || base->kind() != RuleKind::BaseEmpty) return std::nullopt;
  if (!base->exists.empty() || !base->pure.loc_neqs.empty()) return std::nullopt;
  if (base->pure.loc_eqs.size() != 1 || base->pure.data_atoms.size() != 1) return std::nullopt;

  const LocRel& eq = base->pure.loc_eqs[0];
  LocTerm src = LocTerm::of(pp.params[adj_sl]);
  LocTerm c_loc;
  if (eq.lhs == src && eq.rhs.is_nil())
    c_loc = LocTerm::nil();
  else if (eq.rhs == src && eq.lhs.is_nil())
    c_loc = LocTerm::nil();
  else
    return std::nullopt;
  const DataAtom& d = base->pure.data_atoms[0];
  if (d.kind != DataAtom::Kind::MsetEq && !(d.kind == DataAtom::Kind::IntCmp && d.op == CmpOp::Eq))
    return std::nullopt;
  DataTerm c_data;
  Var sdv = pp.params[adj_sd];
  if (term_var(d.lhs) && *term_var(d.lhs) == sdv && free_vars(d.rhs).empty())
    c_data = d.rhs;
  else if (term_var(d.rhs) && *term_var(d.rhs) == sdv && free_vars(d.lhs).empty())
    c_data = d.lhs;
  else
    return std::nullopt;

  // the inductive parts must coincide as sets of rules: distinct rules of
  // the holed predicate may collapse once the hole arguments are dropped
  std::vector<const Rule*> p_ind;
  for (const auto& r : p.rules)
    if (r.kind() == RuleKind::Inductive) p_ind.push_back(&r);
  if (p_ind.empty() || ind_count_pp == 0) return std::nullopt;

  Subst sig_p, sig_pp;
  for (size_t j = 0; j < keep.size(); ++j) {
    Var canon{"%P" + std::to_string(j), pp.params[j].sort};
    sig_p.bind(p.params[keep[j]], Term::of(canon));
    sig_pp.bind(pp.params[j], Term::of(canon));
  }

  std::set<std::string> expected_keys, actual_keys;
  const Var b1 = p.params[roles.hole_loc];
  const Var b2 = p.params[roles.hole_data];
  for (const Rule* r : p_ind) {
    std::vector<SpatialAtom> body;
    for (const auto& a : r->spatial) {
      if (const auto* pa = std::get_if<PredAtom>(&a)) {
        if (pa->pred == p.name && pa->args.size() == p.params.size() &&
            var_term_is(pa->args[roles.hole_loc], b1) &&
            var_term_is(pa->args[roles.hole_data], b2)) {
          PredAtom dropped;
          dropped.pred = pp.name;
          for (int i : keep) dropped.args.push_back(pa->args[i]);
          body.push_back(std::move(dropped));
          continue;
        }
      }
      body.push_back(a);
    }
    expected_keys.insert(canonical_rule_key(r->exists, sig_p(r->pure), sig_p(body)));
  }
  for (const auto& r : pp.rules) {
    if (r.kind() != RuleKind::Inductive) continue;
    actual_keys.insert(canonical_rule_key(r.exists, sig_pp(r.pure), sig_pp(r.spatial)));
  }
  if (expected_keys != actual_keys) return std::nullopt;

  CompletionResult result;
  result.c_loc = c_loc;
  result.c_data = c_data;

  LemmaVars v = lemma_vars(p, roles);
  auto pp_atom = [&](const Term& sl, const Term& sd) {
    PredAtom a;
    a.pred = pp.name;
    for (int i : keep) {
      if (i == roles.source_loc)
        a.args.push_back(sl);
      else if (i == roles.source_data)
        a.args.push_back(sd);
      else
        a.args.push_back(Term::of(p.params[i]));
    }
    return a;
  };
  std::string prefix = pp.name + "-" + p.name;

  Lemma lr;  // P'(a, xi) => P(a, c, xi)
  lr.family = LemmaFamily::Completion;
  lr.id = prefix + ".compl.lr";
  lr.premise_root.push_back(pp_atom(Term::of(v.src_loc), Term::of(v.src_data)));
  lr.conclusion = atom_with(p, roles, Term::of(v.src_loc), Term::of(v.src_data), Term(c_loc),
                            Term(c_data));
  result.lemmas.push_back(lr);

  Lemma rl;  // P(a, c, xi) => P'(a, xi)
  rl.family = LemmaFamily::Completion;
  rl.id = prefix + ".compl.rl";
  rl.premise_root.push_back(SpatialAtom(atom_with(p, roles, Term::of(v.src_loc),
                                                  Term::of(v.src_data), Term(c_loc),
                                                  Term(c_data))));
  rl.conclusion = pp_atom(Term::of(v.src_loc), Term::of(v.src_data));
  result.lemmas.push_back(rl);

  Lemma comp;  // exists b. P(a, b, xi) * P'(b, xi) => P'(a, xi)
  comp.family = LemmaFamily::Completion;
  comp.id = prefix + ".compl.comp";
  comp.premise_exists = {v.hole_loc, v.hole_data};
  comp.premise_root.push_back(atom_with(p, roles, Term::of(v.src_loc), Term::of(v.src_data),
                                        Term::of(v.hole_loc), Term::of(v.hole_data)));
  comp.premise_rest.push_back(SpatialAtom(pp_atom(Term::of(v.hole_loc), Term::of(v.hole_data))));
  comp.conclusion = pp_atom(Term::of(v.src_loc), Term::of(v.src_data));
  result.lemmas.push_back(comp);

  return result;
}

// ---------------------------------------------------------------------------
// Stronger

namespace {

/// Location constraints become integer constraints over fresh symbols; nil
/// is a distinguished constant.
void encode_loc_atoms(const PureFormula& pure, std::vector<DataAtom>& out) {
  auto enc = [](const LocTerm& t) {
    if (t.is_nil()) return DataTerm::lit(0);
    return DataTerm::var(Var{"%L" + t.var().name, Sort::Int});
  };
  for (const auto& e : pure.loc_eqs) out.push_back(DataAtom::int_cmp(CmpOp::Eq, enc(e.lhs), enc(e.rhs)));
  for (const auto& n : pure.loc_neqs)
    out.push_back(DataAtom::int_cmp(CmpOp::Ne, enc(n.lhs), enc(n.rhs)));
}

std::vector<DataAtom> pure_as_data(const PureFormula& pure) {
  std::vector<DataAtom> out = pure.data_atoms;
  encode_loc_atoms(pure, out);
  return out;
}

/// Replaces the recursive atom's head by a neutral marker so two
/// definitions' rules can be compared spatially.
std::vector<SpatialAtom> blind_recursion(const InductiveDef& def, const RoleAssignment& roles,
                                         const Rule& rule) {
  std::vector<SpatialAtom> out;
  const Var b1 = def.params[roles.hole_loc];
  const Var b2 = def.params[roles.hole_data];
  for (const auto& a : rule.spatial) {
    if (const auto* pa = std::get_if<PredAtom>(&a)) {
      if (pa->pred == def.name && pa->args.size() == def.params.size() &&
          var_term_is(pa->args[roles.hole_loc], b1) && var_term_is(pa->args[roles.hole_data], b2)) {
        PredAtom blinded = *pa;
        blinded.pred = "%rec";
        out.push_back(std::move(blinded));
        continue;
      }
    }
    out.push_back(a);
  }
  return out;
}

}  // namespace

std::optional<std::vector<Lemma>> detect_stronger(const InductiveDef& ps,
                                                  const RoleAssignment& rs,
                                                  const InductiveDef& pw,
                                                  const RoleAssignment& rw,
                                                  const DataSolver& solver) {
  if (ps.params.size() != pw.params.size()) return std::nullopt;
  for (size_t i = 0; i < ps.params.size(); ++i)
    if (ps.params[i].sort != pw.params[i].sort) return std::nullopt;
  if (rs.source_loc != rw.source_loc || rs.source_data != rw.source_data ||
      rs.hole_loc != rw.hole_loc || rs.hole_data != rw.hole_data)
    return std::nullopt;
  if (!is_syntactically_compositional(ps, rs).ok) return std::nullopt;
  if (!is_syntactically_compositional(pw, rw).ok) return std::nullopt;

  Subst sig_s, sig_w;
  for (size_t i = 0; i < ps.params.size(); ++i) {
    Var canon{"%P" + std::to_string(i), ps.params[i].sort};
    sig_s.bind(ps.params[i], Term::of(canon));
    sig_w.bind(pw.params[i], Term::of(canon));
  }

  auto base_key = [&](const InductiveDef& def, const Subst& sig) -> std::optional<std::string> {
    for (const auto& r : def.rules)
      if (r.kind() != RuleKind::Inductive)
        return canonical_rule_key(r.exists, sig(r.pure), sig(r.spatial));
    return std::nullopt;
  };
  auto bs = base_key(ps, sig_s);
  auto bw = base_key(pw, sig_w);
  if (!bs || !bw || *bs != *bw) return std::nullopt;

  // every inductive rule of the stronger predicate maps onto a weaker rule
  // with the same spatial part and an implied pure part
  auto spatial_key = [](const Subst& ren, const std::vector<SpatialAtom>& atoms) {
    return render_body(PureFormula{}, ren(atoms));
  };
  for (const auto& rule_s : ps.rules) {
    if (rule_s.kind() != RuleKind::Inductive) continue;
    std::vector<SpatialAtom> blinded_s = blind_recursion(ps, rs, rule_s);
    size_t n = rule_s.exists.size();

    // canonical spatial form of the stronger rule, remembering the renaming
    std::string best_s;
    Subst ren_s_best;
    {
      std::vector<size_t> os(n);
      std::iota(os.begin(), os.end(), 0);
      bool first = true;
      do {
        Subst ren = sig_s;
        for (size_t i = 0; i < n; ++i)
          ren.bind(rule_s.exists[os[i]], Term::of(Var{"%e" + std::to_string(i),
                                                      rule_s.exists[os[i]].sort}));
        std::string key = spatial_key(ren, blinded_s);
        if (first || key < best_s) {
          best_s = key;
          ren_s_best = ren;
          first = false;
        }
      } while (std::next_permutation(os.begin(), os.end()));
    }

    bool matched = false;
    for (const auto& rule_w : pw.rules) {
      if (matched || rule_w.kind() != RuleKind::Inductive) continue;
      if (rule_w.exists.size() != n) continue;
      std::vector<SpatialAtom> blinded_w = blind_recursion(pw, rw, rule_w);
      std::vector<size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      do {
        Subst ren_w = sig_w;
        for (size_t i = 0; i < n; ++i)
          ren_w.bind(rule_w.exists[order[i]], Term::of(Var{"%e" + std::to_string(i),
                                                           rule_w.exists[order[i]].sort}));
        if (spatial_key(ren_w, blinded_w) != best_s) continue;
        DataQuery q;
        q.hypotheses = pure_as_data(ren_s_best(rule_s.pure));
        q.goal = pure_as_data(ren_w(rule_w.pure));
        if (solver.entails(q) == EntailResult::Entailed) {
          matched = true;
          break;
        }
      } while (std::next_permutation(order.begin(), order.end()));
    }
    if (!matched) return std::nullopt;
  }

  std::vector<Lemma> lemmas;
  LemmaVars v = lemma_vars(ps, rs);
  std::string prefix = ps.name + "-" + pw.name;

  Lemma sub;  // P'(a, b, xi) => P(a, b, xi)
  sub.family = LemmaFamily::Stronger;
  sub.id = prefix + ".str.sub";
  sub.premise_root.push_back(atom_with(ps, rs, Term::of(v.src_loc), Term::of(v.src_data),
                                       Term::of(v.hole_loc), Term::of(v.hole_data)));
  sub.conclusion = atom_with(pw, rw, Term::of(v.src_loc), Term::of(v.src_data),
                             Term::of(v.hole_loc), Term::of(v.hole_data));
  lemmas.push_back(sub);

  Lemma comp;  // exists b. P'(a, b, xi) * P(b, g, xi) => P(a, g, xi)
  comp.family = LemmaFamily::Stronger;
  comp.id = prefix + ".str.comp";
  comp.premise_exists = {v.hole_loc, v.hole_data};
  comp.premise_root.push_back(atom_with(ps, rs, Term::of(v.src_loc), Term::of(v.src_data),
                                        Term::of(v.hole_loc), Term::of(v.hole_data)));
  comp.premise_rest.push_back(atom_with(pw, rw, Term::of(v.hole_loc), Term::of(v.hole_data),
                                        Term::of(v.far_loc), Term::of(v.far_data)));
  comp.conclusion = atom_with(pw, rw, Term::of(v.src_loc), Term::of(v.src_data),
                              Term::of(v.far_loc), Term::of(v.far_data));
  lemmas.push_back(comp);

  return lemmas;
}

// ---------------------------------------------------------------------------
// Static-parameter contraction

std::optional<ContractionResult> detect_contraction(const InductiveDef& p,
                                                    const RoleAssignment& roles,
                                                    const InductiveDef& pp) {
  if (!is_syntactically_compositional(p, roles).ok) return std::nullopt;

  const std::vector<int>& statics = roles.statics;
  size_t k = statics.size();
  if (k > 6) return std::nullopt;

  // enumerate contraction functions: each static stays or joins the
  // sort-matching hole parameter
  std::vector<std::vector<int>> choices(k);
  for (size_t i = 0; i < k; ++i) {
    int s = statics[i];
    choices[i].push_back(-1);  // identity
    if (p.params[s].sort == Sort::Loc)
      choices[i].push_back(roles.hole_loc);
    else if (p.params[s].sort == p.params[roles.hole_data].sort)
      choices[i].push_back(roles.hole_data);
  }

  std::vector<size_t> pick(k, 0);
  for (;;) {
    std::map<int, int> contraction;
    std::vector<int> keep;
    Subst eta;
    for (int i = 0; i < static_cast<int>(p.params.size()); ++i) {
      bool contracted = false;
      for (size_t j = 0; j < k; ++j) {
        if (statics[j] != i) continue;
        int target = choices[j][pick[j]];
        contraction[i] = target < 0 ? i : target;
        if (target >= 0) {
          eta.bind(p.params[i], Term::of(p.params[target]));
          contracted = true;
        }
      }
      if (!contracted) keep.push_back(i);
    }

    bool shape_ok = pp.params.size() == keep.size();
    if (shape_ok)
      for (size_t j = 0; j < keep.size(); ++j)
        if (pp.params[j].sort != p.params[keep[j]].sort) shape_ok = false;

    if (shape_ok) {
      Subst sig_p, sig_pp;
      for (size_t j = 0; j < keep.size(); ++j) {
        Var canon{"%P" + std::to_string(j), pp.params[j].sort};
        sig_p.bind(p.params[keep[j]], Term::of(canon));
        sig_pp.bind(pp.params[j], Term::of(canon));
      }
      const Var b1 = p.params[roles.hole_loc];
      const Var b2 = p.params[roles.hole_data];
      std::set<std::string> expected, actual;
      for (const auto& r : p.rules) {
        PureFormula pure = eta(r.pure);
        std::vector<SpatialAtom> body;
        for (const auto& a : eta(r.spatial)) {
          if (const auto* pa = std::get_if<PredAtom>(&a)) {
            if (pa->pred == p.name && pa->args.size() == p.params.size() &&
                var_term_is(pa->args[roles.hole_loc], b1) &&
                var_term_is(pa->args[roles.hole_data], b2)) {
              PredAtom dropped;
              dropped.pred = pp.name;
              for (int i : keep) dropped.args.push_back(pa->args[i]);
              body.push_back(std::move(dropped));
              continue;
            }
          }
          body.push_back(a);
        }
        expected.insert(canonical_rule_key(r.exists, sig_p(pure), sig_p(body)));
      }
      for (const auto& r : pp.rules)
        actual.insert(canonical_rule_key(r.exists, sig_pp(r.pure), sig_pp(r.spatial)));

      if (expected == actual) {
        ContractionResult result;
        result.contraction = contraction;
        LemmaVars v = lemma_vars(p, roles);
        std::string prefix = p.name + "-" + pp.name;

        auto p_atom = [&](const Term& sl, const Term& sd, const Term& hl, const Term& hd,
                          bool contracted_to_hole_args) {
          PredAtom a = atom_with(p, roles, sl, sd, hl, hd);
          for (const auto& [s, target] : contraction) {
            if (target == s) continue;
            a.args[s] = contracted_to_hole_args
                            ? (target == roles.hole_loc ? hl : hd)
                            : a.args[target];
          }
          return a;
        };
        auto pp_atom = [&](const Term& sl, const Term& sd, const Term& hl, const Term& hd) {
          PredAtom a;
          a.pred = pp.name;
          for (int i : keep) {
            if (i == roles.source_loc)
              a.args.push_back(sl);
            else if (i == roles.source_data)
              a.args.push_back(sd);
            else if (i == roles.hole_loc)
              a.args.push_back(hl);
            else if (i == roles.hole_data)
              a.args.push_back(hd);
            else
              a.args.push_back(Term::of(p.params[i]));
          }
          return a;
        };

        Term E = Term::of(v.src_loc), C = Term::of(v.src_data);
        Term B1 = Term::of(v.hole_loc), B2 = Term::of(v.hole_data);
        Term G1 = Term::of(v.far_loc), G2 = Term::of(v.far_data);

        Lemma lr;  // P'(a,b,xi') => P(a,b,eta(xi)): contracted statics = own hole args
        lr.family = LemmaFamily::Contraction;
        lr.id = prefix + ".contr.lr";
        lr.premise_root.push_back(pp_atom(E, C, B1, B2));
        lr.conclusion = p_atom(E, C, B1, B2, true);
        // here the hole pair is free, shared between premise and conclusion
        lr.premise_exists = {};
        result.lemmas.push_back(lr);

        Lemma rl;
        rl.family = LemmaFamily::Contraction;
        rl.id = prefix + ".contr.rl";
        rl.premise_root.push_back(SpatialAtom(p_atom(E, C, B1, B2, true)));
        rl.conclusion = pp_atom(E, C, B1, B2);
        result.lemmas.push_back(rl);

        Lemma comp;  // exists b. P(a,b,eta-xi at g) * P'(b,g,xi') => P'(a,g,xi')
        comp.family = LemmaFamily::Contraction;
        comp.id = prefix + ".contr.comp";
        comp.premise_exists = {v.hole_loc, v.hole_data};
        {
          PredAtom first = atom_with(p, roles, E, C, B1, B2);
          for (const auto& [s, target] : contraction) {
            if (target == s) continue;
            first.args[s] = target == roles.hole_loc ? G1 : G2;
          }
          comp.premise_root.push_back(std::move(first));
        }
        comp.premise_rest.push_back(SpatialAtom(pp_atom(B1, B2, G1, G2)));
        comp.conclusion = pp_atom(E, C, G1, G2);
        result.lemmas.push_back(comp);
        return result;
      }
    }

    // odometer over contraction choices
    size_t pos = 0;
    for (; pos < k; ++pos) {
      if (++pick[pos] < choices[pos].size()) break;
      pick[pos] = 0;
    }
    if (pos == k || k == 0) break;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Assembly

namespace {

std::string dedup_key(const Lemma& l) {
  // canonical over all variables in appearance order
  Subst ren;
  int counter = 0;
  auto visit_term = [&](const Term& t) {
    for (const auto& v : free_vars(t))
      if (!ren.contains(v)) ren.bind(v, Term::of(Var{"%u" + std::to_string(counter++), v.sort}));
  };
  for (const auto& a : l.conclusion.args) visit_term(a);
  for (const auto& atoms : {l.premise_root, l.premise_rest})
    for (const auto& a : atoms)
      for (const auto& v : free_vars(a))
        if (!ren.contains(v)) ren.bind(v, Term::of(Var{"%u" + std::to_string(counter++), v.sort}));
  for (const auto& v : free_vars(l.premise_pure))
    if (!ren.contains(v)) ren.bind(v, Term::of(Var{"%u" + std::to_string(counter++), v.sort}));
  std::vector<SpatialAtom> premise = ren(l.premise_root);
  std::vector<SpatialAtom> rest = ren(l.premise_rest);
  std::string s = std::string(lemma_family_name(l.family)) + "|" +
                  show(ren(SpatialAtom(l.conclusion))) + "|";
  for (const auto& a : premise) s += show(a);
  s += "|";
  for (const auto& a : rest) s += show(a);
  s += "|" + render_body(ren(l.premise_pure), {});
  return s;
}

}  // namespace

std::vector<const Lemma*> LemmaSet::for_conclusion(const std::string& pred) const {
  std::vector<const Lemma*> out;
  for (const auto& l : lemmas)
    if (l.conclusion.pred == pred) out.push_back(&l);
  return out;
}

LemmaSet generate_all_lemmas(const DefMap& defs, const DataSolver& solver) {
  std::vector<Lemma> base, ind, comp, compl_, strong, contr;
  std::map<std::string, std::vector<RoleAssignment>> comp_roles;

  for (const auto& [name, def] : defs) {
    for (auto& l : rules_as_lemmas(def))
      (l.family == LemmaFamily::BaseRule ? base : ind).push_back(std::move(l));
    auto assignments = compositional_assignments(def);
    if (!assignments.empty()) comp_roles[name] = assignments;
    for (const auto& r : assignments) comp.push_back(make_composition_lemma(def, r));
  }

  for (const auto& [pname, assignments] : comp_roles) {
    const InductiveDef& p = defs.at(pname);
    for (const auto& roles : assignments) {
      for (const auto& [qname, q] : defs) {
        if (qname == pname) continue;
        if (auto c = detect_completion(p, roles, q))
          for (auto& l : c->lemmas) compl_.push_back(std::move(l));
        if (auto c = detect_contraction(p, roles, q))
          for (auto& l : c->lemmas) contr.push_back(std::move(l));
      }
      for (const auto& [qname, q_assignments] : comp_roles) {
        if (qname == pname) continue;
        for (const auto& roles_w : q_assignments) {
          if (auto s = detect_stronger(p, roles, defs.at(qname), roles_w, solver))
            for (auto& l : *s) strong.push_back(std::move(l));
        }
      }
    }
  }

  LemmaSet out;
  std::set<std::string> seen;
  auto push_all = [&](std::vector<Lemma>& v) {
    for (auto& l : v)
      if (seen.insert(dedup_key(l)).second) out.lemmas.push_back(std::move(l));
  };
  push_all(base);
  push_all(ind);
  push_all(comp);
  push_all(compl_);
  push_all(strong);
  push_all(contr);
  return out;
}

std::string print_lemma(const Lemma& l) {
  std::string s = "(lemma " + std::string(lemma_family_name(l.family)) + " " + l.id + " (exists (";
  for (size_t i = 0; i < l.premise_exists.size(); ++i) {
    if (i) s += " ";
    s += "(" + l.premise_exists[i].name + " " + sort_name(l.premise_exists[i].sort) + ")";
  }
  s += ")) (pure";
  PureFormula p = l.premise_pure;
  p.sort_canonical();
  std::string ps = show(p);
  if (!ps.empty()) s += " " + ps;
  s += ") (root";
  std::vector<SpatialAtom> root = l.premise_root;
  std::sort(root.begin(), root.end(), spatial_less);
  if (root.empty()) s += " emp";
  for (const auto& a : root) s += " " + show(a);
  s += ") (rest";
  std::vector<SpatialAtom> rest = l.premise_rest;
  std::sort(rest.begin(), rest.end(), spatial_less);
  if (rest.empty()) s += " emp";
  for (const auto& a : rest) s += " " + show(a);
  s += ") (concl " + show(SpatialAtom(l.conclusion)) + "))";
  return s;
}

}  // namespace slent
