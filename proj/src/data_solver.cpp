#include "slent/data_solver.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <set>

namespace slent {

// ---------------------------------------------------------------------------
// Ground evaluation

long long eval_int(const GroundEnv& env, const DataTerm& t) {
  switch (t.kind()) {
    case DataTerm::Kind::VarRef: {
      auto it = env.ints.find(t.var_ref());
      if (it == env.ints.end()) throw SlentError("no value for " + t.var_ref().name);
      return it->second;
    }
    case DataTerm::Kind::IntLit: return t.value();
    case DataTerm::Kind::Add: return eval_int(env, t.child0()) + eval_int(env, t.child1());
    case DataTerm::Kind::Neg: return -eval_int(env, t.child0());
    default: throw SlentError("not an integer term");
  }
}

std::vector<long long> eval_mset(const GroundEnv& env, const DataTerm& t) {
  switch (t.kind()) {
    case DataTerm::Kind::VarRef: {
      auto it = env.msets.find(t.var_ref());
      if (it == env.msets.end()) throw SlentError("no value for " + t.var_ref().name);
      return it->second;
    }
    case DataTerm::Kind::EmptySet: return {};
    case DataTerm::Kind::Singleton: return {eval_int(env, t.child0())};
    case DataTerm::Kind::Union: {
      auto a = eval_mset(env, t.child0());
      auto b = eval_mset(env, t.child1());
      a.insert(a.end(), b.begin(), b.end());
      std::sort(a.begin(), a.end());
      return a;
    }
    default: throw SlentError("not a multiset term");
  }
}

bool eval_ground(const GroundEnv& env, const DataAtom& atom) {
  auto cmp = [](CmpOp op, long long a, long long b) {
    switch (op) {
      case CmpOp::Eq: return a == b;
      case CmpOp::Ne: return a != b;
      case CmpOp::Lt: return a < b;
      case CmpOp::Le: return a <= b;
    }
    return false;
  };
  switch (atom.kind) {
    case DataAtom::Kind::IntCmp:
      return cmp(atom.op, eval_int(env, atom.lhs), eval_int(env, atom.rhs));
    case DataAtom::Kind::Member: {
      long long v = eval_int(env, atom.lhs);
      auto m = eval_mset(env, atom.rhs);
      return std::find(m.begin(), m.end(), v) != m.end();
    }
    case DataAtom::Kind::MsetEq: return eval_mset(env, atom.lhs) == eval_mset(env, atom.rhs);
    case DataAtom::Kind::AllCmp: {
      // universally quantified over both sides, vacuous over empty sets
      std::vector<long long> ls, rs;
      if (atom.lhs.sort() == Sort::Mset)
        ls = eval_mset(env, atom.lhs);
      else
        ls = {eval_int(env, atom.lhs)};
      if (atom.rhs.sort() == Sort::Mset)
        rs = eval_mset(env, atom.rhs);
      else
        rs = {eval_int(env, atom.rhs)};
      for (long long a : ls)
        for (long long b : rs)
          if (!cmp(atom.op, a, b)) return false;
      return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Flattened multisets

namespace {

struct FlatMset {
  std::vector<DataTerm> elems;  // Int-sorted terms
  std::vector<Var> sets;        // multiset variables

  void canonicalize() {
    std::sort(elems.begin(), elems.end(),
              [](const DataTerm& a, const DataTerm& b) { return compare(a, b) < 0; });
    std::sort(sets.begin(), sets.end());
  }
  bool empty() const { return elems.empty() && sets.empty(); }
  size_t size() const { return elems.size() + sets.size(); }
};

DataTerm fold_int(const DataTerm& t) {
  switch (t.kind()) {
    case DataTerm::Kind::Add: {
      DataTerm a = fold_int(t.child0());
      DataTerm b = fold_int(t.child1());
      if (a.kind() == DataTerm::Kind::IntLit && b.kind() == DataTerm::Kind::IntLit)
        return DataTerm::lit(a.value() + b.value());
      return DataTerm::add(a, b);
    }
    case DataTerm::Kind::Neg: {
      DataTerm a = fold_int(t.child0());
      if (a.kind() == DataTerm::Kind::IntLit) return DataTerm::lit(-a.value());
      return DataTerm::neg(a);
    }
    default: return t;
  }
}

void flatten_into(const DataTerm& t, FlatMset& out) {
  switch (t.kind()) {
    case DataTerm::Kind::EmptySet: return;
    case DataTerm::Kind::Singleton: out.elems.push_back(fold_int(t.child0())); return;
    case DataTerm::Kind::VarRef: out.sets.push_back(t.var_ref()); return;
    case DataTerm::Kind::Union:
      flatten_into(t.child0(), out);
      flatten_into(t.child1(), out);
      return;
    default: throw SlentError("not a multiset term");
  }
}

FlatMset flatten(const DataTerm& t) {
  FlatMset f;
  flatten_into(t, f);
  f.canonicalize();
  return f;
}

DataTerm unflatten(const FlatMset& f) {
  std::vector<DataTerm> parts;
  for (const auto& e : f.elems) parts.push_back(DataTerm::singleton(e));
  for (const auto& s : f.sets) parts.push_back(DataTerm::var(s));
  if (parts.empty()) return DataTerm::empty_set();
  DataTerm acc = parts[0];
  for (size_t i = 1; i < parts.size(); ++i) acc = DataTerm::mset_union(acc, parts[i]);
  return acc;
}

bool contains_var(const DataTerm& t, const Var& v) {
  auto fv = free_vars(t);
  return fv.count(v) != 0;
}

bool contains_any(const DataTerm& t, const std::set<Var>& vars) {
  for (const auto& v : free_vars(t))
    if (vars.count(v)) return true;
  return false;
}

bool contains_any(const DataAtom& a, const std::set<Var>& vars) {
  return contains_any(a.lhs, vars) || contains_any(a.rhs, vars);
}

// ---------------------------------------------------------------------------
// Saturated hypothesis context: integer difference bounds + expanded
// element/set orderings + memberships.

constexpr long long kInf = std::numeric_limits<long long>::max() / 4;

struct HypContext {
  // difference-bound closure over integer terms: dist[i][j] <= c means
  // term_i - term_j <= c in every model of the hypotheses
  std::vector<DataTerm> terms;
  std::map<std::string, int> term_ids;
  std::vector<std::vector<long long>> dist;
  bool inconsistent = false;

  std::vector<std::tuple<CmpOp, DataTerm, Var>> elem_le_set;  // e op M
  std::vector<std::tuple<CmpOp, Var, DataTerm>> set_le_elem;  // M op e
  std::vector<std::tuple<CmpOp, Var, Var>> set_le_set;        // M op N
  std::vector<std::pair<DataTerm, Var>> members;              // v in M
  std::vector<DataAtom> raw;                                  // for subsumption
  std::vector<std::pair<DataTerm, DataTerm>> int_neqs;

  int id(const DataTerm& t) {
    std::string key = show(t);
    auto it = term_ids.find(key);
    if (it != term_ids.end()) return it->second;
    int i = static_cast<int>(terms.size());
    term_ids.emplace(key, i);
    terms.push_back(t);
    for (auto& row : dist) row.push_back(kInf);
    dist.emplace_back(terms.size(), kInf);
    dist[i][i] = 0;
    return i;
  }

  void edge(const DataTerm& a, const DataTerm& b, long long w) {
    int i = id(a), j = id(b);
    dist[i][j] = std::min(dist[i][j], w);
  }

  void close() {
    id(DataTerm::lit(0));  // anchor for literals outside the matrix
    size_t n = terms.size();
    // literal nodes know their pairwise differences
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j)
        if (terms[i].kind() == DataTerm::Kind::IntLit && terms[j].kind() == DataTerm::Kind::IntLit)
          dist[i][j] = std::min(dist[i][j], terms[i].value() - terms[j].value());
    for (size_t k = 0; k < n; ++k)
      for (size_t i = 0; i < n; ++i) {
        if (dist[i][k] >= kInf) continue;
        for (size_t j = 0; j < n; ++j) {
          if (dist[k][j] >= kInf) continue;
          dist[i][j] = std::min(dist[i][j], dist[i][k] + dist[k][j]);
        }
      }
    for (size_t i = 0; i < n; ++i)
      if (dist[i][i] < 0) inconsistent = true;
  }

  long long distance(const DataTerm& a, const DataTerm& b) const {
    if (compare(a, b) == 0) return 0;
    bool la = a.kind() == DataTerm::Kind::IntLit;
    bool lb = b.kind() == DataTerm::Kind::IntLit;
    if (la && lb) return a.value() - b.value();
    auto ia = term_ids.find(show(a));
    auto ib = term_ids.find(show(b));
    if (ia != term_ids.end() && ib != term_ids.end()) return dist[ia->second][ib->second];
    // literals outside the matrix route through the zero anchor
    auto iz = term_ids.find("0");
    if (iz != term_ids.end()) {
      if (ia == term_ids.end() && la && ib != term_ids.end()) {
        long long d = dist[iz->second][ib->second];
        if (d < kInf) return a.value() + d;
      }
      if (ib == term_ids.end() && lb && ia != term_ids.end()) {
        long long d = dist[ia->second][iz->second];
        if (d < kInf) return d - b.value();
      }
    }
    return kInf;
  }

  bool le(const DataTerm& a, const DataTerm& b) const { return distance(a, b) <= 0; }
  bool lt(const DataTerm& a, const DataTerm& b) const { return distance(a, b) <= -1; }
  bool eq(const DataTerm& a, const DataTerm& b) const { return le(a, b) && le(b, a); }

  bool ne(const DataTerm& a, const DataTerm& b) const {
    if (lt(a, b) || lt(b, a)) return true;
    for (const auto& [x, y] : int_neqs) {
      if ((eq(a, x) && eq(b, y)) || (eq(a, y) && eq(b, x))) return true;
    }
    return false;
  }
};

/// Repeatedly substitutes multiset variables defined by hypothesis
/// equalities, so cancellation can act on common flat parts.
Subst mset_substitution(std::vector<DataAtom>& hyps) {
  Subst subst;
  for (int round = 0; round < 16; ++round) {
    std::optional<std::pair<Var, DataTerm>> pick;
    for (const auto& a : hyps) {
      if (a.kind != DataAtom::Kind::MsetEq) continue;
      auto lv = a.lhs.kind() == DataTerm::Kind::VarRef ? std::optional<Var>(a.lhs.var_ref())
                                                       : std::nullopt;
      auto rv = a.rhs.kind() == DataTerm::Kind::VarRef ? std::optional<Var>(a.rhs.var_ref())
                                                       : std::nullopt;
      if (lv && !contains_var(a.rhs, *lv) && !(rv && *rv == *lv)) {
        if (rv && rv->name < lv->name) {
          pick = {*rv, a.lhs};  // keep the smaller name
        } else {
          pick = {*lv, a.rhs};
        }
        break;
      }
      if (rv && !contains_var(a.lhs, *rv)) {
        pick = {*rv, a.lhs};
        break;
      }
    }
    if (!pick) break;
    Subst step;
    step.bind(pick->first, Term(pick->second));
    for (auto& a : hyps) a = step(a);
    // drop trivial equalities
    std::vector<DataAtom> kept;
    for (auto& a : hyps)
      if (!(a.kind == DataAtom::Kind::MsetEq && a.lhs == a.rhs)) kept.push_back(a);
    hyps = std::move(kept);
    subst = Subst::compose(step, subst);
  }
  return subst;
}

HypContext build_context(std::vector<DataAtom> hyps) {
  HypContext ctx;
  ctx.raw = hyps;
  std::vector<DataAtom> todo = std::move(hyps);
  for (size_t i = 0; i < todo.size(); ++i) {
    DataAtom a = todo[i];
    switch (a.kind) {
      case DataAtom::Kind::IntCmp: {
        DataTerm l = fold_int(a.lhs), r = fold_int(a.rhs);
        switch (a.op) {
          case CmpOp::Le: ctx.edge(l, r, 0); break;
          case CmpOp::Lt: ctx.edge(l, r, -1); break;
          case CmpOp::Eq:
            ctx.edge(l, r, 0);
            ctx.edge(r, l, 0);
            break;
          case CmpOp::Ne: ctx.int_neqs.push_back({l, r}); break;
        }
        break;
      }
      case DataAtom::Kind::MsetEq: {
        // residual non-variable equality: both sides share flat parts only
        // if syntactically equal; keep for subsumption, derive emptiness
        FlatMset l = flatten(a.lhs), r = flatten(a.rhs);
        if (l.empty()) {
          // every elem/set of r is empty-constrained; elems impossible, but
          // that is a hypothesis inconsistency we do not chase structurally
          (void)r;
        }
        break;
      }
      case DataAtom::Kind::Member: {
        FlatMset f = flatten(a.rhs);
        if (f.size() == 1 && f.sets.size() == 1) {
          ctx.members.push_back({fold_int(a.lhs), f.sets[0]});
        } else if (f.size() == 1 && f.elems.size() == 1) {
          todo.push_back(DataAtom::int_cmp(CmpOp::Eq, a.lhs, f.elems[0]));
        }
        // unions stay disjunctive; usable only via raw subsumption
        break;
      }
      case DataAtom::Kind::AllCmp: {
        FlatMset l, r;
        if (a.lhs.sort() == Sort::Mset)
          l = flatten(a.lhs);
        else
          l.elems.push_back(fold_int(a.lhs));
        if (a.rhs.sort() == Sort::Mset)
          r = flatten(a.rhs);
        else
          r.elems.push_back(fold_int(a.rhs));
        for (const auto& le : l.elems) {
          for (const auto& re : r.elems)
            todo.push_back(DataAtom::int_cmp(a.op, le, re));
          for (const auto& rs : r.sets) ctx.elem_le_set.push_back({a.op, le, rs});
        }
        for (const auto& ls : l.sets) {
          for (const auto& re : r.elems) ctx.set_le_elem.push_back({a.op, ls, re});
          for (const auto& rs : r.sets) ctx.set_le_set.push_back({a.op, ls, rs});
        }
        break;
      }
    }
  }
  ctx.close();
  return ctx;
}

bool subsumed_raw(const HypContext& ctx, const DataAtom& goal) {
  for (const auto& h : ctx.raw)
    if (compare(h, goal) == 0) return true;
  // multiset equalities also match with flipped sides or flat-equal sides
  if (goal.kind == DataAtom::Kind::MsetEq) {
    FlatMset gl = flatten(goal.lhs), gr = flatten(goal.rhs);
    for (const auto& h : ctx.raw) {
      if (h.kind != DataAtom::Kind::MsetEq) continue;
      FlatMset hl = flatten(h.lhs), hr = flatten(h.rhs);
      auto same = [](const FlatMset& a, const FlatMset& b) {
        return a.sets == b.sets && a.elems.size() == b.elems.size() &&
               std::equal(a.elems.begin(), a.elems.end(), b.elems.begin(),
                          [](const DataTerm& x, const DataTerm& y) { return compare(x, y) == 0; });
      };
      if ((same(gl, hl) && same(gr, hr)) || (same(gl, hr) && same(gr, hl))) return true;
    }
  }
  return false;
}

/// Removes components common to both sides; elements cancel when equal under
/// the integer closure (restricted to exvar-free elements).
void cancel_common(FlatMset& l, FlatMset& r, const HypContext& ctx, const std::set<Var>& exvars) {
  // sets cancel by name
  for (auto it = l.sets.begin(); it != l.sets.end();) {
    auto jt = std::find(r.sets.begin(), r.sets.end(), *it);
    if (jt != r.sets.end()) {
      r.sets.erase(jt);
      it = l.sets.erase(it);
    } else {
      ++it;
    }
  }
  for (auto it = l.elems.begin(); it != l.elems.end();) {
    bool cancelled = false;
    for (auto jt = r.elems.begin(); jt != r.elems.end(); ++jt) {
      bool ground = !contains_any(*it, exvars) && !contains_any(*jt, exvars);
      if (compare(*it, *jt) == 0 || (ground && ctx.eq(*it, *jt))) {
        r.elems.erase(jt);
        it = l.elems.erase(it);
        cancelled = true;
        break;
      }
    }
    if (!cancelled) ++it;
  }
}

struct GoalSolver {
  const HypContext& ctx;
  const std::set<Var>& exvars;
  Subst witness;
  std::vector<std::pair<Var, Var>> aliases;

  explicit GoalSolver(const HypContext& c, const std::set<Var>& ex) : ctx(c), exvars(ex) {}

  bool is_exvar(const Var& v) const { return exvars.count(v) != 0 && !witness.contains(v); }

  Var alias_rep(const Var& v) const {
    // follow alias links to the smallest member
    Var rep = v;
    bool changed = true;
    std::set<Var> seen{v};
    while (changed) {
      changed = false;
      for (const auto& [a, b] : aliases) {
        Var other;
        if (a == rep)
          other = b;
        else if (b == rep)
          other = a;
        else
          continue;
        if (other < rep && seen.insert(other).second) {
          rep = other;
          changed = true;
        }
      }
    }
    return rep;
  }

  DataAtom rewrite(const DataAtom& a) const {
    DataAtom r = witness(a);
    // collapse alias classes to their representative
    Subst alias_subst;
    for (const auto& v : free_vars(r)) {
      if (!exvars.count(v) || witness.contains(v)) continue;
      Var rep = alias_rep(v);
      if (!(rep == v)) alias_subst.bind(v, Term::of(rep));
    }
    return alias_subst(r);
  }

  void bind(const Var& v, const DataTerm& t) {
    witness.bind(v, Term(t));
    // grounding one member of an alias class grounds the others
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& [a, b] : aliases) {
        const Term* ta = witness.find(a);
        const Term* tb = witness.find(b);
        if (ta && !tb) {
          witness.bind(b, *ta);
          changed = true;
        } else if (tb && !ta) {
          witness.bind(a, *tb);
          changed = true;
        }
      }
    }
  }

  // true = satisfied, false = cannot be established (yet)
  bool try_goal(const DataAtom& atom, bool allow_witnessing) {
    DataAtom a = rewrite(atom);
    bool has_ex = contains_any(a, exvars) &&
                  [&] {
                    for (const auto& v : free_vars(a))
                      if (is_exvar(v)) return true;
                    return false;
                  }();
    if (!has_ex) return decide_ground(a);
    if (!allow_witnessing) return false;
    return infer_witness(a);
  }

  bool decide_ground(const DataAtom& a) {
    if (ctx.inconsistent) return true;
    if (subsumed_raw(ctx, a)) return true;
    switch (a.kind) {
      case DataAtom::Kind::IntCmp: {
        DataTerm l = fold_int(a.lhs), r = fold_int(a.rhs);
        switch (a.op) {
          case CmpOp::Le: return ctx.le(l, r);
          case CmpOp::Lt: return ctx.lt(l, r);
          case CmpOp::Eq: return ctx.eq(l, r);
          case CmpOp::Ne: return ctx.ne(l, r);
        }
        return false;
      }
      case DataAtom::Kind::Member: {
        DataTerm v = fold_int(a.lhs);
        FlatMset f = flatten(a.rhs);
        for (const auto& e : f.elems)
          if (ctx.eq(v, e)) return true;
        for (const auto& s : f.sets)
          for (const auto& [mv, ms] : ctx.members)
            if (ms == s && ctx.eq(v, mv)) return true;
        return false;
      }
      case DataAtom::Kind::MsetEq: {
        FlatMset l = flatten(a.lhs), r = flatten(a.rhs);
        cancel_common(l, r, ctx, exvars);
        return l.empty() && r.empty();
      }
      case DataAtom::Kind::AllCmp: {
        FlatMset l, r;
        if (a.lhs.sort() == Sort::Mset)
          l = flatten(a.lhs);
        else
          l.elems.push_back(fold_int(a.lhs));
        if (a.rhs.sort() == Sort::Mset)
          r = flatten(a.rhs);
        else
          r.elems.push_back(fold_int(a.rhs));
        for (const auto& le : l.elems) {
          for (const auto& re : r.elems)
            if (!decide_ground(DataAtom::int_cmp(a.op, le, re))) return false;
          for (const auto& rs : r.sets)
            if (!elem_set(a.op, le, rs)) return false;
        }
        for (const auto& ls : l.sets) {
          for (const auto& re : r.elems)
            if (!set_elem(a.op, ls, re)) return false;
          for (const auto& rs : r.sets)
            if (!set_set(a.op, ls, rs)) return false;
        }
        return true;
      }
    }
    return false;
  }

  // e op every element of M
  bool elem_set(CmpOp op, const DataTerm& e, const Var& m) {
    for (const auto& [hop, he, hm] : ctx.elem_le_set) {
      if (!(hm == m)) continue;
      long long d = ctx.distance(fold_int(e), he);
      if (d >= kInf) continue;
      bool strict = hop == CmpOp::Lt || d <= -1;
      if (op == CmpOp::Le && d <= 0) return true;
      if (op == CmpOp::Lt && d <= 0 && strict) return true;
    }
    return false;
  }

  // every element of M op e
  bool set_elem(CmpOp op, const Var& m, const DataTerm& e) {
    for (const auto& [hop, hm, he] : ctx.set_le_elem) {
      if (!(hm == m)) continue;
      long long d = ctx.distance(he, fold_int(e));
      if (d >= kInf) continue;
      bool strict = hop == CmpOp::Lt || d <= -1;
      if (op == CmpOp::Le && d <= 0) return true;
      if (op == CmpOp::Lt && d <= 0 && strict) return true;
    }
    return false;
  }

  // every element of M op every element of N; pivots must be integers,
  // a multiset pivot could be empty and breaks transitivity
  bool set_set(CmpOp op, const Var& m, const Var& n) {
    for (const auto& [hop, hm, hn] : ctx.set_le_set) {
      if (hm == m && hn == n && (hop == op || (hop == CmpOp::Lt && op == CmpOp::Le))) return true;
    }
    for (const auto& [op1, hm, p] : ctx.set_le_elem) {
      if (!(hm == m)) continue;
      for (const auto& [op2, q, hn] : ctx.elem_le_set) {
        if (!(hn == n)) continue;
        long long d = ctx.distance(p, q);
        if (d >= kInf) continue;
        bool strict = op1 == CmpOp::Lt || op2 == CmpOp::Lt || d <= -1;
        if (d <= 0 && (op == CmpOp::Le || strict)) return true;
      }
    }
    return false;
  }

  bool infer_witness(const DataAtom& a) {
    if (a.kind == DataAtom::Kind::IntCmp && a.op == CmpOp::Eq) {
      auto lv = a.lhs.kind() == DataTerm::Kind::VarRef ? std::optional<Var>(a.lhs.var_ref())
                                                       : std::nullopt;
      auto rv = a.rhs.kind() == DataTerm::Kind::VarRef ? std::optional<Var>(a.rhs.var_ref())
                                                       : std::nullopt;
      bool lex = lv && is_exvar(*lv);
      bool rex = rv && is_exvar(*rv);
      if (lex && !contains_exvars(a.rhs)) {
        bind(*lv, fold_int(a.rhs));
        return true;
      }
      if (rex && !contains_exvars(a.lhs)) {
        bind(*rv, fold_int(a.lhs));
        return true;
      }
      if (lex && rex) {
        aliases.push_back({*lv, *rv});
        return true;
      }
      return false;
    }
    if (a.kind == DataAtom::Kind::MsetEq) {
      FlatMset l = flatten(a.lhs), r = flatten(a.rhs);
      cancel_common(l, r, ctx, exvars);
      return unify_flat(l, r);
    }
    return false;
  }

  bool contains_exvars(const DataTerm& t) const {
    for (const auto& v : free_vars(t))
      if (is_exvar(v)) return true;
    return false;
  }

  bool side_has_exvars(const FlatMset& f) const {
    for (const auto& s : f.sets)
      if (is_exvar(s)) return true;
    for (const auto& e : f.elems)
      if (contains_exvars(e)) return true;
    return false;
  }

  bool unify_flat(FlatMset l, FlatMset r) {
    if (l.empty() && r.empty()) return true;
    // orient: the side with existentials is matched against the other
    if (!side_has_exvars(l) && side_has_exvars(r)) std::swap(l, r);
    if (side_has_exvars(r)) {
      // both sides existential: only the single-variable alias case
      if (l.size() == 1 && r.size() == 1 && l.sets.size() == 1 && r.sets.size() == 1 &&
          is_exvar(l.sets[0]) && is_exvar(r.sets[0])) {
        aliases.push_back({l.sets[0], r.sets[0]});
        return true;
      }
      return false;
    }
    if (!side_has_exvars(l)) return l.empty() && r.empty();
    // a single existential set variable absorbs the whole remainder
    if (l.size() == 1 && l.sets.size() == 1 && is_exvar(l.sets[0])) {
      bind(l.sets[0], unflatten(r));
      return true;
    }
    // otherwise match components one-to-one
    if (l.size() != r.size()) return false;
    // ground parts of l must cancel against r first
    for (auto it = l.sets.begin(); it != l.sets.end();) {
      if (is_exvar(*it)) {
        ++it;
        continue;
      }
      auto jt = std::find(r.sets.begin(), r.sets.end(), *it);
      if (jt == r.sets.end()) return false;
      r.sets.erase(jt);
      it = l.sets.erase(it);
    }
    // remaining existential sets bind to remaining r sets in canonical order
    size_t free_sets = 0;
    for (const auto& s : l.sets)
      if (is_exvar(s)) ++free_sets;
    if (free_sets != l.sets.size()) return false;
    if (l.sets.size() > r.sets.size()) return false;
    if (l.sets.size() < r.sets.size() && !(l.sets.size() == 1)) return false;
    if (l.sets.size() == 1 && l.elems.empty()) {
      FlatMset rest;
      rest.sets = r.sets;
      rest.elems = r.elems;
      bind(l.sets[0], unflatten(rest));
      return true;
    }
    if (l.sets.size() != r.sets.size()) return false;
    for (size_t i = 0; i < l.sets.size(); ++i) bind(l.sets[i], DataTerm::var(r.sets[i]));
    if (l.elems.size() != r.elems.size()) return false;
    for (size_t i = 0; i < l.elems.size(); ++i) {
      const DataTerm& le = l.elems[i];
      const DataTerm& re = r.elems[i];
      if (le.kind() == DataTerm::Kind::VarRef && is_exvar(le.var_ref())) {
        bind(le.var_ref(), re);
      } else if (compare(rewrite_term(le), re) == 0 || ctx.eq(rewrite_term(le), re)) {
        // fine
      } else {
        return false;
      }
    }
    return true;
  }

  DataTerm rewrite_term(const DataTerm& t) const { return witness(t); }
};

}  // namespace

// ---------------------------------------------------------------------------
// Entailment entry points

ExistsResult DataSolver::entails_exists(const std::vector<DataAtom>& hyps_in,
                                        const std::vector<DataAtom>& goal,
                                        const std::set<Var>& exvars) const {
  ++queries_;
  std::vector<DataAtom> hyps = hyps_in;
  Subst msubst = mset_substitution(hyps);
  HypContext ctx = build_context(hyps);

  GoalSolver solver(ctx, exvars);
  std::vector<DataAtom> pending;
  pending.reserve(goal.size());
  for (const auto& g : goal) pending.push_back(msubst(g));

  // equalities first so they can produce witnesses for the rest
  std::stable_sort(pending.begin(), pending.end(), [](const DataAtom& a, const DataAtom& b) {
    auto rank = [](const DataAtom& x) {
      if (x.kind == DataAtom::Kind::MsetEq) return 0;
      if (x.kind == DataAtom::Kind::IntCmp && x.op == CmpOp::Eq) return 1;
      return 2;
    };
    return rank(a) < rank(b);
  });

  std::vector<bool> done(pending.size(), false);
  bool progress = true;
  size_t rounds = pending.size() + 2;
  while (progress && rounds-- > 0) {
    progress = false;
    for (size_t i = 0; i < pending.size(); ++i) {
      if (done[i]) continue;
      if (solver.try_goal(pending[i], /*allow_witnessing=*/true)) {
        done[i] = true;
        progress = true;
      }
    }
  }
  ExistsResult result;
  for (bool d : done)
    if (!d) return result;  // ok = false
  // final audit: with all witnesses substituted, every goal atom must be
  // ground-entailed (alias classes collapse to their representatives)
  for (const auto& g : pending) {
    DataAtom a = solver.rewrite(g);
    bool residual_ex = false;
    for (const auto& v : free_vars(a))
      if (solver.is_exvar(v)) residual_ex = true;
    if (residual_ex) {
      // only the trivial reflexive equality may mention unbound members
      if (a.kind == DataAtom::Kind::IntCmp && a.op == CmpOp::Eq && compare(a.lhs, a.rhs) == 0)
        continue;
      if (a.kind == DataAtom::Kind::MsetEq && compare(a.lhs, a.rhs) == 0) continue;
      return result;
    }
    if (!solver.decide_ground(a)) return result;
  }
  result.ok = true;
  result.witness = solver.witness;
  result.aliases = solver.aliases;
  return result;
}

EntailResult DataSolver::entails(const DataQuery& q) const {
  std::set<Var> no_exvars;
  ExistsResult structural = entails_exists(q.hypotheses, q.goal, no_exvars);
  if (structural.ok) return EntailResult::Entailed;

  bool mset_goal = false;
  for (const auto& g : q.goal)
    if (g.kind == DataAtom::Kind::MsetEq) mset_goal = true;

  if (has_backend() && !mset_goal) {
    EncodedQuery enc = encode_smtlib(q, round_++);
    std::string answer = run_smt_process(backend_cmd_, enc.script, backend_timeout_ms_);
    if (answer == "unsat") return EntailResult::Entailed;
  }
  if (auto env = find_ground_witness(q)) return EntailResult::NotEntailed;
  return EntailResult::Unknown;
}

void DataSolver::set_backend(std::string command, int timeout_ms) {
  backend_cmd_ = std::move(command);
  backend_timeout_ms_ = timeout_ms;
}

// ---------------------------------------------------------------------------
// Ground witness search

std::optional<GroundEnv> find_ground_witness(const DataQuery& q, long budget) {
  std::set<Var> vars;
  for (const auto& a : q.hypotheses)
    for (const auto& v : free_vars(a)) vars.insert(v);
  for (const auto& a : q.goal)
    for (const auto& v : free_vars(a)) vars.insert(v);

  std::vector<Var> ivars, mvars;
  for (const auto& v : vars) {
    if (v.sort == Sort::Mset)
      mvars.push_back(v);
    else
      ivars.push_back(v);
  }
  static const std::vector<long long> int_domain = {-2, -1, 0, 1, 2, 3};
  std::vector<std::vector<long long>> mset_domain;
  {
    std::vector<long long> elems = {-1, 0, 1, 2};
    mset_domain.push_back({});
    for (long long a : elems) mset_domain.push_back({a});
    for (size_t i = 0; i < elems.size(); ++i)
      for (size_t j = i; j < elems.size(); ++j) mset_domain.push_back({elems[i], elems[j]});
  }

  std::vector<size_t> idx(ivars.size() + mvars.size(), 0);
  long tried = 0;
  for (;;) {
    if (++tried > budget) return std::nullopt;
    GroundEnv env;
    for (size_t i = 0; i < ivars.size(); ++i) env.ints[ivars[i]] = int_domain[idx[i]];
    for (size_t i = 0; i < mvars.size(); ++i)
      env.msets[mvars[i]] = mset_domain[idx[ivars.size() + i]];
    bool hyps_ok = true;
    for (const auto& h : q.hypotheses)
      if (!eval_ground(env, h)) {
        hyps_ok = false;
        break;
      }
    if (hyps_ok) {
      for (const auto& g : q.goal)
        if (!eval_ground(env, g)) return env;
    }
    // odometer
    size_t pos = 0;
    for (; pos < idx.size(); ++pos) {
      size_t limit = pos < ivars.size() ? int_domain.size() : mset_domain.size();
      if (++idx[pos] < limit) break;
      idx[pos] = 0;
    }
    if (pos == idx.size()) return std::nullopt;
    if (idx.empty()) return std::nullopt;
  }
}

}  // namespace slent
