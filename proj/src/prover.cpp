#include "slent/prover.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

namespace slent {

const char* step_rule_name(StepRule r) {
  switch (r) {
    case StepRule::Match1: return "Match1";
    case StepRule::Match2: return "Match2";
    case StepRule::Lemma: return "Lemma";
    case StepRule::Slice: return "Slice";
    case StepRule::UnsatLhs: return "UnsatLhs";
  }
  return "?";
}

const char* verdict_name(Verdict::Kind k) {
  switch (k) {
    case Verdict::Kind::Valid: return "VALID";
    case Verdict::Kind::Invalid: return "INVALID";
    case Verdict::Kind::Unknown: return "UNKNOWN";
  }
  return "?";
}

std::string ProofTrace::to_string() const {
  std::ostringstream out;
  for (const auto& s : steps) {
    for (int i = 0; i < s.depth; ++i) out << "  ";
    out << step_rule_name(s.rule);
    if (s.rule == StepRule::Lemma) out << "(" << lemma_family_name(s.family) << " " << s.lemma_id << ")";
    if (!s.target.empty()) out << " target=" << s.target;
    if (!s.consumed.empty()) {
      out << " consumed=[";
      for (size_t i = 0; i < s.consumed.size(); ++i) out << (i ? " " : "") << s.consumed[i];
      out << "]";
    }
    if (!s.eta.empty()) out << " eta=" << s.eta;
    out << "\n";
  }
  return out.str();
}

std::vector<StepRule> ProofTrace::rule_sequence() const {
  std::vector<StepRule> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.rule);
  return out;
}

LemmaCounters count_trace(const ProofTrace& t) {
  LemmaCounters c;
  for (const auto& s : t.steps) {
    if (s.rule == StepRule::Match2) {
      ++c.syntactic;
    } else if (s.rule == StepRule::Lemma) {
      switch (s.family) {
        case LemmaFamily::BaseRule: ++c.base; break;
        case LemmaFamily::InductiveRule: ++c.inductive; break;
        case LemmaFamily::Composition: ++c.composition; break;
        default: ++c.derived; break;
      }
    }
  }
  return c;
}

namespace {

struct TimeoutException {};
struct BudgetException {};

struct Bindings {
  Subst ground;
  std::vector<std::pair<Var, Var>> aliases;

  bool canonicalize() {
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& [a, b] : aliases) {
        const Term* ta = ground.find(a);
        const Term* tb = ground.find(b);
        if (ta && !tb) {
          ground.bind(b, *ta);
          changed = true;
        } else if (tb && !ta) {
          ground.bind(a, *tb);
          changed = true;
        } else if (ta && tb && !(*ta == *tb)) {
          return false;
        }
      }
    }
    return true;
  }

  bool bound_or_aliased(const Var& v) const {
    if (ground.contains(v)) return true;
    for (const auto& [a, b] : aliases)
      if (a == v || b == v) return true;
    return false;
  }
};

Term default_value(Sort s) {
  switch (s) {
    case Sort::Loc: return Term(LocTerm::nil());
    case Sort::Int: return Term(DataTerm::lit(0));
    case Sort::Mset: return Term(DataTerm::empty_set());
  }
  return Term(DataTerm::lit(0));
}

struct Engine {
  const LemmaSet& lemmas;
  const DataSolver& solver;
  const EqClassStore& store;
  PureFormula lhs_pure;
  std::vector<SpatialAtom> atoms;
  std::set<Var> binders;  // data binders of the judgement under proof

  std::vector<TraceStep> trace;
  long long steps = 0;
  long long budget = 0;
  std::chrono::steady_clock::time_point deadline;
  int fresh_counter = 0;
  int fail_depth = -1;
  std::string fail_note;

  using Pool = uint64_t;
  using Cont = std::function<bool(Bindings&, Pool)>;

  Engine(const LemmaSet& ls, const DataSolver& sv, const EqClassStore& st)
      : lemmas(ls), solver(sv), store(st) {}

  void tick() {
    if (++steps > budget) throw BudgetException{};
    if ((steps & 0xff) == 0 && std::chrono::steady_clock::now() > deadline)
      throw TimeoutException{};
  }

  void note_fail(int depth, const std::string& what) {
    if (depth > fail_depth) {
      fail_depth = depth;
      fail_note = what;
    }
  }

  Pool full_pool() const { return atoms.size() >= 63 ? 0 : (Pool(1) << atoms.size()) - 1; }

  bool is_binder(const Var& v) const { return binders.count(v) != 0; }

  std::set<Var> unbound_in(const std::set<Var>& scope, const Bindings& b) const {
    std::set<Var> out;
    for (const auto& v : scope)
      if (!b.ground.contains(v)) out.insert(v);
    return out;
  }

  // ---- equality propagation (the ext extension)

  void ext_extend(const PureFormula& pure, Bindings& b, const std::set<Var>& scope) {
    bool changed = true;
    while (changed) {
      changed = false;
      std::set<Var> unbound = unbound_in(scope, b);
      auto try_bind = [&](const Var& x, const Term& t) {
        if (!unbound.count(x)) return;
        Term t2 = b.ground(t);
        for (const auto& fv : free_vars(t2))
          if (unbound.count(fv) && !(fv == x)) return;
        if (free_vars(t2).count(x)) return;
        b.ground.bind(x, t2);
        changed = true;
        unbound.erase(x);
      };
      for (const auto& e : pure.loc_eqs) {
        if (e.lhs.is_var()) try_bind(e.lhs.var(), Term(e.rhs));
        if (e.rhs.is_var()) try_bind(e.rhs.var(), Term(e.lhs));
      }
      for (const auto& d : pure.data_atoms) {
        bool is_eq = d.kind == DataAtom::Kind::MsetEq ||
                     (d.kind == DataAtom::Kind::IntCmp && d.op == CmpOp::Eq);
        if (!is_eq) continue;
        if (d.lhs.kind() == DataTerm::Kind::VarRef) try_bind(d.lhs.var_ref(), Term(d.rhs));
        if (d.rhs.kind() == DataTerm::Kind::VarRef) try_bind(d.rhs.var_ref(), Term(d.lhs));
      }
      if (changed && !b.canonicalize()) return;  // conflicting aliases surface later
    }
  }

  // ---- pure side conditions

  std::vector<DataAtom> hypothesis_atoms(const Bindings& b) const {
    std::vector<DataAtom> hyps = lhs_pure.data_atoms;
    for (const auto& [v, t] : b.ground.entries()) {
      if (v.sort == Sort::Loc) continue;
      if (v.sort == Sort::Mset)
        hyps.push_back(DataAtom::mset_eq(DataTerm::var(v), t.data()));
      else
        hyps.push_back(DataAtom::int_cmp(CmpOp::Eq, DataTerm::var(v), t.data()));
    }
    return hyps;
  }

  bool discharge_pure(const PureFormula& goal, Bindings& b, const std::set<Var>& scope,
                      int depth) {
    PureFormula g = b.ground(goal);
    for (const auto& e : g.loc_eqs) {
      if (!entails_pure_loc(store, e, true)) {
        note_fail(depth, "pure " + show(e, true));
        return false;
      }
    }
    for (const auto& n : g.loc_neqs) {
      if (!entails_pure_loc(store, n, false)) {
        note_fail(depth, "pure " + show(n, false));
        return false;
      }
    }
    if (g.data_atoms.empty()) return true;
    std::set<Var> exvars = unbound_in(scope, b);
    ExistsResult res = solver.entails_exists(hypothesis_atoms(b), g.data_atoms, exvars);
    if (!res.ok) {
      note_fail(depth, "pure data constraints");
      return false;
    }
    try {
      b.ground.merge(res.witness);
    } catch (const SlentError&) {
      return false;
    }
    for (const auto& al : res.aliases) b.aliases.push_back(al);
    return b.canonicalize();
  }

  // ---- syntactic matching (the SUB judgement)

  struct MatchState {
    Subst theta;                              // bindings for the given binder set
    std::vector<std::pair<Term, Term>> free_conds;  // lhs term = rhs free var
    Pool consumed = 0;
  };

  bool match_term(const Term& rhs, const Term& lhs, const std::set<Var>& zs, MatchState& st) {
    // rhs variable positions may be bound (binders) or conditioned (free)
    auto rv = rhs.as_var();
    if (rv) {
      if (zs.count(*rv)) {
        const Term* bound = st.theta.find(*rv);
        if (bound) return *bound == lhs;
        if (lhs.sort() != rv->sort) return false;
        st.theta.bind(*rv, lhs);
        return true;
      }
      if (rhs == lhs) return true;
      if (rhs.sort() != lhs.sort()) return false;
      st.free_conds.push_back({lhs, rhs});
      return true;
    }
    if (rhs.is_loc()) return lhs.is_loc() && rhs.loc() == lhs.loc();
    if (!lhs.is_loc() && rhs.data().kind() == lhs.data().kind()) {
      const DataTerm& r = rhs.data();
      const DataTerm& l = lhs.data();
      switch (r.kind()) {
        case DataTerm::Kind::IntLit: return r.value() == l.value();
        case DataTerm::Kind::EmptySet: return true;
        case DataTerm::Kind::Neg:
        case DataTerm::Kind::Singleton:
          return match_term(Term(r.child0()), Term(l.child0()), zs, st);
        case DataTerm::Kind::Add:
        case DataTerm::Kind::Union:
          return match_term(Term(r.child0()), Term(l.child0()), zs, st) &&
                 match_term(Term(r.child1()), Term(l.child1()), zs, st);
        default: return false;
      }
    }
    return false;
  }

  bool match_atom_pair(const SpatialAtom& rhs, const SpatialAtom& lhs, const std::set<Var>& zs,
                       MatchState& st) {
    if (rhs.index() != lhs.index()) return false;
    if (const auto* rp = std::get_if<PointsTo>(&rhs)) {
      const auto& lp = std::get<PointsTo>(lhs);
      if (rp->cells.size() != lp.cells.size()) return false;
      if (!match_term(Term(rp->root), Term(lp.root), zs, st)) return false;
      auto li = lp.cells.begin();
      for (auto ri = rp->cells.begin(); ri != rp->cells.end(); ++ri, ++li) {
        if (ri->first != li->first) return false;
        if (!match_term(ri->second, li->second, zs, st)) return false;
      }
      return true;
    }
    const auto& ra = std::get<PredAtom>(rhs);
    const auto& la = std::get<PredAtom>(lhs);
    if (ra.pred != la.pred || ra.args.size() != la.args.size()) return false;
    for (size_t i = 0; i < ra.args.size(); ++i)
      if (!match_term(ra.args[i], la.args[i], zs, st)) return false;
    return true;
  }

  bool check_free_conds(const MatchState& st, const Bindings& b, int depth) {
    std::vector<DataAtom> goals;
    for (const auto& [lhs, rhs] : st.free_conds) {
      if (lhs.is_loc()) {
        if (!entails_pure_loc(store, LocRel{rhs.loc(), lhs.loc()}, true)) {
          note_fail(depth, "match condition " + show(rhs) + " = " + show(lhs));
          return false;
        }
      } else if (lhs.data().sort() == Sort::Mset) {
        goals.push_back(DataAtom::mset_eq(rhs.data(), lhs.data()));
      } else {
        goals.push_back(DataAtom::int_cmp(CmpOp::Eq, rhs.data(), lhs.data()));
      }
    }
    if (goals.empty()) return true;
    Bindings tmp = b;
    for (const auto& [v, t] : st.theta.entries()) {
      try {
        tmp.ground.bind(v, t);
      } catch (const SlentError&) {
        return false;
      }
    }
    DataQuery q{hypothesis_atoms(tmp), goals};
    if (solver.entails(q) != EntailResult::Entailed) {
      note_fail(depth, "match data conditions");
      return false;
    }
    return true;
  }

  /// Matches all rhs atoms against distinct pool atoms; every solution is
  /// passed to the continuation.
  bool match_sub(const std::vector<SpatialAtom>& rhs_atoms, const std::set<Var>& zs, Pool pool,
                 const Bindings& b, int depth,
                 const std::function<bool(const MatchState&)>& k) {
    MatchState st;
    return match_rec(rhs_atoms, 0, zs, pool, b, depth, st, k);
  }

  bool match_rec(std::vector<SpatialAtom> rhs_atoms, size_t idx, const std::set<Var>& zs,
                 Pool pool, const Bindings& b, int depth, MatchState st,
                 const std::function<bool(const MatchState&)>& k) {
    if (idx == rhs_atoms.size()) {
      if (!check_free_conds(st, b, depth)) return false;
      return k(st);
    }
    // prefer an atom whose root is already concrete
    size_t pick = idx;
    for (size_t j = idx; j < rhs_atoms.size(); ++j) {
      LocTerm root = spatial_root(st.theta(rhs_atoms[j]));
      if (root.is_nil() || !zs.count(root.var()) || st.theta.contains(root.var())) {
        pick = j;
        break;
      }
    }
    std::swap(rhs_atoms[idx], rhs_atoms[pick]);
    SpatialAtom target = st.theta(rhs_atoms[idx]);
    for (size_t i = 0; i < atoms.size(); ++i) {
      if (!(pool & (Pool(1) << i))) continue;
      MatchState st2 = st;
      if (!match_atom_pair(target, atoms[i], zs, st2)) continue;
      st2.consumed |= Pool(1) << i;
      if (match_rec(rhs_atoms, idx + 1, zs, pool & ~(Pool(1) << i), b, depth, std::move(st2), k))
        return true;
    }
    return false;
  }

  // ---- the proof rules

  std::vector<const Lemma*> trial_order(const std::string& pred) const {
    std::vector<const Lemma*> all = lemmas.for_conclusion(pred);
    std::vector<const Lemma*> out;
    for (const auto* l : all)
      if (l->family == LemmaFamily::BaseRule) out.push_back(l);
    // syntactic matching is interleaved by the caller at this point
    for (const auto* l : all)
      if (l->family != LemmaFamily::BaseRule && l->family != LemmaFamily::InductiveRule)
        out.push_back(l);
    for (const auto* l : all)
      if (l->family == LemmaFamily::InductiveRule) out.push_back(l);
    return out;
  }

  bool solve(const Judgement& j, Pool pool, Bindings b, int depth, const Cont& k) {
    tick();
    size_t mark = trace.size();
    bool ok = solve_inner(j, pool, std::move(b), depth, k);
    if (!ok) trace.resize(mark);
    return ok;
  }

  bool solve_inner(const Judgement& j, Pool pool, Bindings b, int depth, const Cont& k) {
    // pure-only right-hand side: nothing is consumed
    if (j.rhs_spatial.empty()) {
      Bindings b2 = b;
      ext_extend(j.rhs_pure, b2, scope_of(j, b2));
      if (!discharge_pure(j.rhs_pure, b2, scope_of(j, b2), depth)) return false;
      return k(b2, 0);
    }
    // single predicate atom without pure constraints: match or apply lemmas
    if (j.rhs_spatial.size() == 1 && j.rhs_pure.empty() &&
        std::holds_alternative<PredAtom>(j.rhs_spatial[0])) {
      return atom_goal(j.rhs_spatial[0], scope_of(j, b), pool, b, depth, k);
    }
    // otherwise slice atom by atom
    trace.push_back({StepRule::Slice, depth, LemmaFamily::BaseRule, "", render_judgement(j), {},
                     ""});
    std::vector<SpatialAtom> order = b.ground(j.rhs_spatial);
    std::sort(order.begin(), order.end(), spatial_less);
    return slice_rec(j, order, 0, pool, std::move(b), 0, depth, k);
  }

  std::set<Var> scope_of(const Judgement& j, const Bindings&) const {
    std::set<Var> s(j.rhs_exists.begin(), j.rhs_exists.end());
    return s;
  }

  std::string render_judgement(const Judgement& j) const {
    std::string s;
    for (const auto& a : j.rhs_spatial) s += (s.empty() ? "" : " * ") + show(a);
    std::string p = show(j.rhs_pure);
    if (!p.empty()) s += (s.empty() ? "" : " /\\ ") + p;
    return s;
  }

  bool slice_rec(const Judgement& j, const std::vector<SpatialAtom>& order, size_t idx, Pool pool,
                 Bindings b, Pool consumed, int depth, const Cont& k) {
    if (idx == order.size()) {
      Bindings b2 = b;
      std::set<Var> scope = scope_of(j, b2);
      ext_extend(j.rhs_pure, b2, scope);
      if (!discharge_pure(j.rhs_pure, b2, scope, depth)) return false;
      // witness totality at this judgement: every binder occurring in the
      // judgement must be grounded or at least linked
      std::set<Var> occurring = free_vars(SymbolicHeap{{}, j.rhs_pure, j.rhs_spatial});
      for (const auto& v : j.rhs_exists) {
        if (!occurring.count(v)) continue;
        if (!b2.bound_or_aliased(v)) {
          note_fail(depth, "no witness for " + v.name);
          return false;
        }
      }
      return k(b2, consumed);
    }
    std::set<Var> scope = scope_of(j, b);
    return atom_goal(order[idx], scope, pool, b, depth + 1,
                     [&](Bindings& b2, Pool c) {
                       return slice_rec(j, order, idx + 1, pool & ~c, b2, consumed | c, depth, k);
                     });
  }

  bool atom_goal(const SpatialAtom& target_in, const std::set<Var>& scope, Pool pool, Bindings b,
                 int depth, const Cont& k) {
    tick();
    size_t mark = trace.size();
    SpatialAtom target = b.ground(target_in);

    if (const auto* pt = std::get_if<PointsTo>(&target)) {
      // cells match only syntactically
      for (size_t i = 0; i < atoms.size(); ++i) {
        if (!(pool & (Pool(1) << i))) continue;
        MatchState st;
        if (!match_atom_pair(SpatialAtom(*pt), atoms[i], scope, st)) continue;
        if (!check_free_conds(st, b, depth)) continue;
        Bindings b2 = b;
        if (!merge_theta(b2, st.theta, scope)) continue;
        Bindings b3 = b2;
        if (k(b3, Pool(1) << i)) return true;
        trace.resize(mark);
      }
      note_fail(depth, "cell " + show(target));
      return false;
    }

    const auto& pa = std::get<PredAtom>(target);

    auto lemma_pass = [&](LemmaFamily only) -> bool {
      for (const Lemma* l : trial_order(pa.pred)) {
        if (only == LemmaFamily::BaseRule && l->family != LemmaFamily::BaseRule) continue;
        if (only == LemmaFamily::InductiveRule && l->family == LemmaFamily::BaseRule) continue;
        if (try_lemma(*l, pa, scope, pool, b, depth, k)) return true;
        trace.resize(mark);
      }
      return false;
    };

    // base-rule lemmas first, then plain matching, then the remaining lemmas
    if (lemma_pass(LemmaFamily::BaseRule)) return true;

    for (size_t i = 0; i < atoms.size(); ++i) {
      if (!(pool & (Pool(1) << i))) continue;
      MatchState st;
      if (!match_atom_pair(target, atoms[i], scope, st)) continue;
      if (!check_free_conds(st, b, depth)) continue;
      Bindings b2 = b;
      if (!merge_theta(b2, st.theta, scope)) continue;
      trace.push_back({StepRule::Match2, depth, LemmaFamily::BaseRule, "", show(target),
                       {show(atoms[i])}, show_bindings(st.theta)});
      Bindings b3 = b2;
      if (k(b3, Pool(1) << i)) return true;
      trace.resize(mark);
    }

    if (lemma_pass(LemmaFamily::InductiveRule)) return true;
    note_fail(depth, "atom " + show(target));
    trace.resize(mark);
    return false;
  }

  bool merge_theta(Bindings& b, const Subst& theta, const std::set<Var>& scope) {
    for (const auto& [v, t] : theta.entries()) {
      if (!scope.count(v)) continue;  // justified free bindings are conditions, not witnesses
      try {
        b.ground.bind(v, t);
      } catch (const SlentError&) {
        return false;
      }
    }
    return b.canonicalize();
  }

  std::string show_bindings(const Subst& s) const { return s.empty() ? "" : show(s); }

  bool try_lemma(const Lemma& l, const PredAtom& target, const std::set<Var>& scope, Pool pool,
                 Bindings b, int depth, const Cont& k) {
    tick();
    if (l.conclusion.args.size() != target.args.size()) return false;
    size_t mark = trace.size();

    // unify the lemma's conclusion with the target: lemma variables map to
    // target terms; ground lemma positions may witness target binders
    std::set<Var> lemma_vars;
    for (const auto& a : l.conclusion.args)
      for (const auto& v : free_vars(a)) lemma_vars.insert(v);
    for (const auto& atoms_ : {l.premise_root, l.premise_rest})
      for (const auto& a : atoms_)
        for (const auto& v : free_vars(a)) lemma_vars.insert(v);
    for (const auto& v : free_vars(l.premise_pure)) lemma_vars.insert(v);

    Subst theta_c;
    Bindings b2 = b;
    std::function<bool(const Term&, const Term&)> unify = [&](const Term& u,
                                                              const Term& t) -> bool {
      auto uv = u.as_var();
      if (uv && lemma_vars.count(*uv)) {
        const Term* bound = theta_c.find(*uv);
        if (bound) return *bound == t;
        if (t.sort() != uv->sort) return false;
        theta_c.bind(*uv, t);
        return true;
      }
      // ground lemma position
      if (u == t) return true;
      auto tv = t.as_var();
      if (tv && scope.count(*tv) && free_vars(u).empty()) {
        // the target position is an unbound binder: the lemma's constant is
        // its witness
        if (b2.ground.contains(*tv)) return *b2.ground.find(*tv) == u;
        if (u.sort() != tv->sort) return false;
        b2.ground.bind(*tv, u);
        return true;
      }
      if (u.is_loc() || t.is_loc()) return false;
      if (u.data().kind() != t.data().kind()) return false;
      switch (u.data().kind()) {
        case DataTerm::Kind::Neg:
        case DataTerm::Kind::Singleton:
          return unify(Term(u.data().child0()), Term(t.data().child0()));
        case DataTerm::Kind::Add:
        case DataTerm::Kind::Union:
          return unify(Term(u.data().child0()), Term(t.data().child0())) &&
                 unify(Term(u.data().child1()), Term(t.data().child1()));
        default: return false;
      }
    };
    for (size_t i = 0; i < target.args.size(); ++i)
      if (!unify(l.conclusion.args[i], target.args[i])) return false;
    if (!b2.canonicalize()) return false;

    // freshen the premise existentials
    Subst alpha = theta_c;
    std::vector<Var> zf;
    for (const auto& z : l.premise_exists) {
      Var f{"%z" + std::to_string(fresh_counter++) + "_" + z.name, z.sort};
      alpha.bind(z, Term::of(f));
      zf.push_back(f);
    }
    // remaining lemma variables not pinned by the conclusion (none for the
    // synthesized families, but rule bodies may mention parameters only in
    // the body when ill-formed) must be absent
    for (const auto& v : lemma_vars)
      if (!theta_c.contains(v) && std::find(l.premise_exists.begin(), l.premise_exists.end(), v) ==
                                      l.premise_exists.end())
        return false;

    std::vector<SpatialAtom> root = alpha(l.premise_root);
    std::vector<SpatialAtom> rest = alpha(l.premise_rest);
    PureFormula prem_pure = alpha(l.premise_pure);

    std::set<Var> scope_all = scope;
    for (const auto& f : zf) scope_all.insert(f);
    std::set<Var> z_prime;
    for (const auto& v : free_vars(root))
      if (scope_all.count(v)) z_prime.insert(v);

    trace.push_back({StepRule::Lemma, depth, l.family, l.id, show(SpatialAtom(target)), {}, ""});

    bool ok = match_sub(root, z_prime, pool, b2, depth + 1, [&](const MatchState& ms) {
      Bindings b3 = b2;
      if (!merge_theta_all(b3, ms.theta)) return false;
      size_t mark2 = trace.size();
      if (!root.empty()) {
        std::vector<std::string> consumed;
        for (size_t i = 0; i < atoms.size(); ++i)
          if (ms.consumed & (Pool(1) << i)) consumed.push_back(show(atoms[i]));
        trace.push_back({StepRule::Match1, depth + 1, LemmaFamily::BaseRule, "",
                         render_atoms(root), consumed, show_bindings(ms.theta)});
      }
      // instantiate the remaining premise with the root match
      PureFormula rest_pure = b3.ground(prem_pure);
      std::vector<SpatialAtom> rest_spatial = b3.ground(rest);
      Judgement inner;
      inner.rhs_pure = rest_pure;
      inner.rhs_spatial = rest_spatial;
      std::set<Var> rest_free = free_vars(SymbolicHeap{{}, rest_pure, rest_spatial});
      for (const auto& v : scope_all)
        if (rest_free.count(v) && !b3.ground.contains(v)) inner.rhs_exists.push_back(v);

      bool done = solve(inner, pool & ~ms.consumed, b3, depth + 1, [&](Bindings& b4, Pool c2) {
        Bindings b5 = b4;
        ext_extend(prem_pure, b5, scope_all);
        if (!b5.canonicalize()) return false;
        // the lemma's own existentials must now be witnessed or linked
        for (const auto& f : zf) {
          std::set<Var> everywhere = free_vars(SymbolicHeap{{}, prem_pure, root});
          for (const auto& v : free_vars(SymbolicHeap{{}, PureFormula{}, rest}))
            everywhere.insert(v);
          if (everywhere.count(f) && !b5.bound_or_aliased(f)) {
            note_fail(depth, "no instantiation for " + f.name);
            return false;
          }
        }
        return k(b5, ms.consumed | c2);
      });
      if (!done) trace.resize(mark2);
      return done;
    });
    if (!ok) trace.resize(mark);
    return ok;
  }

  bool merge_theta_all(Bindings& b, const Subst& theta) {
    for (const auto& [v, t] : theta.entries()) {
      try {
        b.ground.bind(v, t);
      } catch (const SlentError&) {
        return false;
      }
    }
    return b.canonicalize();
  }

  std::string render_atoms(const std::vector<SpatialAtom>& v) const {
    std::string s;
    for (const auto& a : v) s += (s.empty() ? "" : " * ") + show(a);
    return s.empty() ? "emp" : s;
  }
};

}  // namespace

Verdict prove(const Problem& problem, const LemmaSet& lemmas, const DataSolver& solver,
              const Oracle* oracle, const ProverConfig& config) {
  Verdict verdict;
  if (!problem.query) {
    verdict.diagnosis = "no query";
    return verdict;
  }
  long data_checks_before = solver.query_count();
  const Query& q = *problem.query;
  auto deadline = std::chrono::steady_clock::now() +
                  std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                      std::chrono::duration<double>(config.timeout_seconds));

  std::string deepest_note;
  int deepest_depth = -1;
  bool any_vacuous = false;

  for (size_t li = 0; li < q.lhs.disjuncts.size(); ++li) {
    SaturationResult sat = saturate(q.lhs.disjuncts[li]);
    if (sat.contradiction) {
      DisjunctProof p;
      p.lhs_index = li;
      p.vacuous = true;
      p.trace.steps.push_back({StepRule::UnsatLhs, 0, LemmaFamily::BaseRule, "", "", {}, ""});
      verdict.proofs.push_back(std::move(p));
      any_vacuous = true;
      continue;
    }

    bool proven = false;
    for (size_t ri = 0; ri < q.rhs.disjuncts.size() && !proven; ++ri) {
      const SymbolicHeap& rd = q.rhs.disjuncts[ri];
      Engine engine(lemmas, solver, sat.store);
      engine.lhs_pure = sat.heap.pure;
      engine.atoms = sat.heap.spatial;
      std::sort(engine.atoms.begin(), engine.atoms.end(), spatial_less);
      if (engine.atoms.size() >= 63) {
        verdict.diagnosis = "too many spatial atoms";
        return verdict;
      }
      engine.binders = std::set<Var>(rd.exists.begin(), rd.exists.end());
      engine.deadline = deadline;
      engine.budget = config.budget_factor * static_cast<long long>(engine.atoms.size() + 2) *
                      static_cast<long long>(engine.atoms.size() + 2) *
                      static_cast<long long>(lemmas.size() + 2);

      Judgement top;
      top.rhs_exists = rd.exists;
      top.rhs_pure = rd.pure;
      top.rhs_spatial = rd.spatial;

      DisjunctProof proof;
      proof.lhs_index = li;
      proof.rhs_index = ri;

      try {
        bool ok = engine.solve(top, engine.full_pool(), Bindings{}, 0,
                               [&](Bindings& b, Engine::Pool consumed) {
          if (consumed != engine.full_pool()) return false;  // leftover heap
          Bindings final = b;
          if (!final.canonicalize()) return false;
          // close out: unconstrained binders get sort defaults, alias
          // classes collapse onto any grounded member
          for (const auto& v : rd.exists) {
            if (!final.ground.contains(v)) {
              bool linked = false;
              for (const auto& [a, bb] : final.aliases)
                if (a == v || bb == v) linked = true;
              if (!linked) final.ground.bind(v, default_value(v.sort));
            }
          }
          bool progress = true;
          while (progress) {
            progress = false;
            for (const auto& [a, bb] : final.aliases) {
              if (final.ground.contains(a) && !final.ground.contains(bb)) {
                final.ground.bind(bb, *final.ground.find(a));
                progress = true;
              } else if (final.ground.contains(bb) && !final.ground.contains(a)) {
                final.ground.bind(a, *final.ground.find(bb));
                progress = true;
              }
            }
          }
          for (const auto& v : rd.exists)
            if (!final.ground.contains(v)) final.ground.bind(v, default_value(v.sort));

          // post-hoc audit: the witnessed pure part must follow from the
          // left-hand side on its own
          PureFormula audited = final.ground(rd.pure);
          for (const auto& e : audited.loc_eqs)
            if (!entails_pure_loc(sat.store, e, true)) return false;
          for (const auto& n : audited.loc_neqs)
            if (!entails_pure_loc(sat.store, n, false)) return false;
          if (!audited.data_atoms.empty()) {
            DataQuery audit{sat.heap.pure.data_atoms, audited.data_atoms};
            if (solver.entails(audit) != EntailResult::Entailed) return false;
          }
          for (const auto& v : rd.exists) proof.witness.bind(v, *final.ground.find(v));
          return true;
        });
        if (ok) {
          proof.trace.steps = engine.trace;
          verdict.proofs.push_back(std::move(proof));
          proven = true;
        }
      } catch (const TimeoutException&) {
        verdict.kind = Verdict::Kind::Unknown;
        verdict.diagnosis = "timeout";
        verdict.data_checks = solver.query_count() - data_checks_before;
        return verdict;
      } catch (const BudgetException&) {
        // this right-hand disjunct exhausted its budget; try the next one
      }
      if (engine.fail_depth > deepest_depth) {
        deepest_depth = engine.fail_depth;
        deepest_note = engine.fail_note;
      }
    }

    if (!proven) {
      verdict.data_checks = solver.query_count() - data_checks_before;
      if (oracle) {
        Formula lhs_one{{q.lhs.disjuncts[li]}};
        if (auto counter = oracle->refute_entailment(lhs_one, q.rhs)) {
          verdict.kind = Verdict::Kind::Invalid;
          verdict.countermodel = std::move(counter);
          verdict.diagnosis = "countermodel found at " + oracle->bounds().to_string();
          return verdict;
        }
      }
      verdict.kind = Verdict::Kind::Unknown;
      verdict.diagnosis =
          deepest_note.empty() ? "strategy exhausted" : "stuck at: " + deepest_note;
      return verdict;
    }
  }

  verdict.kind = Verdict::Kind::Valid;
  if (any_vacuous) verdict.diagnosis = "unsat-lhs";
  for (const auto& p : verdict.proofs) {
    LemmaCounters c = count_trace(p.trace);
    verdict.counters.base += c.base;
    verdict.counters.inductive += c.inductive;
    verdict.counters.syntactic += c.syntactic;
    verdict.counters.composition += c.composition;
    verdict.counters.derived += c.derived;
  }
  verdict.data_checks = solver.query_count() - data_checks_before;
  return verdict;
}

}  // namespace slent
