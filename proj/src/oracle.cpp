#include "slent/oracle.hpp"

#include <algorithm>
#include <memory>
#include <sstream>

namespace slent {

std::string Bounds::to_string() const {
  std::ostringstream s;
  s << "cells=" << max_cells << ",locs=" << loc_universe << ",data=" << data_domain.front()
    << ".." << data_domain.back() << ",mult=" << max_multiplicity;
  return s.str();
}

std::optional<Bounds> parse_bounds(const std::string& text) {
  Bounds b;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    auto eq = part.find('=');
    if (eq == std::string::npos) return std::nullopt;
    std::string key = part.substr(0, eq);
    std::string val = part.substr(eq + 1);
    try {
      if (key == "cells") {
        b.max_cells = std::stoi(val);
      } else if (key == "locs") {
        b.loc_universe = std::stoi(val);
      } else if (key == "mult") {
        b.max_multiplicity = std::stoi(val);
      } else if (key == "data") {
        auto dots = val.find("..");
        if (dots == std::string::npos) return std::nullopt;
        long long lo = std::stoll(val.substr(0, dots));
        long long hi = std::stoll(val.substr(dots + 2));
        if (lo > hi) return std::nullopt;
        b.data_domain.clear();
        for (long long v = lo; v <= hi; ++v) b.data_domain.push_back(v);
      } else {
        return std::nullopt;
      }
    } catch (...) {
      return std::nullopt;
    }
  }
  if (b.max_cells < 1 || b.loc_universe < 1 || b.data_domain.empty() || b.max_multiplicity < 1)
    return std::nullopt;
  return b;
}

std::string print_model(const BoundedModel& m) {
  std::ostringstream s;
  s << "stack:";
  if (m.stack.empty()) s << " (empty)";
  s << "\n";
  for (const auto& [v, val] : m.stack) {
    s << "  " << v.name << " = ";
    if (val.sort == Sort::Loc) {
      s << (val.scalar == 0 ? std::string("nil") : "loc" + std::to_string(val.scalar));
    } else if (val.sort == Sort::Int) {
      s << val.scalar;
    } else {
      s << "{";
      for (size_t i = 0; i < val.mset.size(); ++i) s << (i ? "," : "") << val.mset[i];
      s << "}";
    }
    s << "\n";
  }
  s << "heap:";
  if (m.heap.empty()) s << " (empty)";
  s << "\n";
  for (const auto& [loc, cell] : m.heap) {
    s << "  loc" << loc << " |->";
    for (const auto& [f, val] : cell) {
      s << " (" << f << ": ";
      if (val.sort == Sort::Loc)
        s << (val.scalar == 0 ? std::string("nil") : "loc" + std::to_string(val.scalar));
      else
        s << val.scalar;
      s << ")";
    }
    s << "\n";
  }
  return s.str();
}

namespace {

/// Variable valuation with union-find aliasing: an equality between two
/// still-unknown variables links them, and a later value reaches the whole
/// class.
class Env {
 public:
  Env() = default;
  explicit Env(const std::map<Var, Value>& m) : vals_(m) {}

  Var rep(const Var& v) const {
    Var r = v;
    for (;;) {
      auto it = parent_.find(r);
      if (it == parent_.end()) return r;
      r = it->second;
    }
  }

  const Value* find(const Var& v) const {
    auto it = vals_.find(rep(v));
    return it == vals_.end() ? nullptr : &it->second;
  }

  bool count(const Var& v) const { return find(v) != nullptr; }

  void set(const Var& v, Value val) { vals_[rep(v)] = std::move(val); }

  /// Links two variables; if either side already has a value the class
  /// keeps it. Returns false when both are bound to different values.
  bool alias(const Var& a, const Var& b) {
    Var ra = rep(a), rb = rep(b);
    if (ra == rb) return true;
    auto ia = vals_.find(ra);
    auto ib = vals_.find(rb);
    if (ia != vals_.end() && ib != vals_.end()) return ia->second == ib->second;
    if (ia != vals_.end()) {
      parent_[rb] = ra;
    } else {
      parent_[ra] = rb;
    }
    return true;
  }

 private:
  std::map<Var, Value> vals_;
  std::map<Var, Var> parent_;
};

std::vector<Value> space_of(Sort s, const Bounds& b) {
  std::vector<Value> out;
  switch (s) {
    case Sort::Loc:
      for (int i = 0; i <= b.loc_universe; ++i) out.push_back(Value{Sort::Loc, i, {}});
      break;
    case Sort::Int:
      for (long long v : b.data_domain) out.push_back(Value{Sort::Int, v, {}});
      break;
    case Sort::Mset: {
      // all multisets over the domain with per-element multiplicity bounded,
      // ordered by size then lexicographically
      std::vector<std::vector<long long>> all;
      std::vector<int> counts(b.data_domain.size(), 0);
      for (;;) {
        std::vector<long long> m;
        for (size_t i = 0; i < counts.size(); ++i)
          for (int c = 0; c < counts[i]; ++c) m.push_back(b.data_domain[i]);
        std::sort(m.begin(), m.end());
        all.push_back(std::move(m));
        size_t pos = 0;
        for (; pos < counts.size(); ++pos) {
          if (++counts[pos] <= b.max_multiplicity) break;
          counts[pos] = 0;
        }
        if (pos == counts.size()) break;
      }
      std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) {
        if (x.size() != y.size()) return x.size() < y.size();
        return x < y;
      });
      all.erase(std::unique(all.begin(), all.end()), all.end());
      for (auto& m : all) out.push_back(Value{Sort::Mset, 0, std::move(m)});
      break;
    }
  }
  return out;
}

std::optional<Value> eval_loc_term(const Env& env, const LocTerm& t) {
  if (t.is_nil()) return Value{Sort::Loc, 0, {}};
  const Value* v = env.find(t.var());
  if (!v) return std::nullopt;
  return *v;
}

std::optional<Value> eval_data_term(const Env& env, const DataTerm& t) {
  switch (t.kind()) {
    case DataTerm::Kind::VarRef: {
      const Value* v = env.find(t.var_ref());
      if (!v) return std::nullopt;
      return *v;
    }
    case DataTerm::Kind::IntLit: return Value{Sort::Int, t.value(), {}};
    case DataTerm::Kind::EmptySet: return Value{Sort::Mset, 0, {}};
    case DataTerm::Kind::Add: {
      auto a = eval_data_term(env, t.child0());
      auto b = eval_data_term(env, t.child1());
      if (!a || !b) return std::nullopt;
      return Value{Sort::Int, a->scalar + b->scalar, {}};
    }
    case DataTerm::Kind::Neg: {
      auto a = eval_data_term(env, t.child0());
      if (!a) return std::nullopt;
      return Value{Sort::Int, -a->scalar, {}};
    }
    case DataTerm::Kind::Singleton: {
      auto a = eval_data_term(env, t.child0());
      if (!a) return std::nullopt;
      return Value{Sort::Mset, 0, {a->scalar}};
    }
    case DataTerm::Kind::Union: {
      auto a = eval_data_term(env, t.child0());
      auto b = eval_data_term(env, t.child1());
      if (!a || !b) return std::nullopt;
      std::vector<long long> m = a->mset;
      m.insert(m.end(), b->mset.begin(), b->mset.end());
      std::sort(m.begin(), m.end());
      return Value{Sort::Mset, 0, std::move(m)};
    }
  }
  return std::nullopt;
}

std::optional<Value> eval_term(const Env& env, const Term& t) {
  if (t.is_loc()) return eval_loc_term(env, t.loc());
  return eval_data_term(env, t.data());
}

std::optional<bool> eval_data_atom(const Env& env, const DataAtom& a) {
  auto l = eval_data_term(env, a.lhs);
  auto r = eval_data_term(env, a.rhs);
  if (!l || !r) return std::nullopt;
  auto cmp = [](CmpOp op, long long x, long long y) {
    switch (op) {
      case CmpOp::Eq: return x == y;
      case CmpOp::Ne: return x != y;
      case CmpOp::Lt: return x < y;
      case CmpOp::Le: return x <= y;
    }
    return false;
  };
  switch (a.kind) {
    case DataAtom::Kind::IntCmp: return cmp(a.op, l->scalar, r->scalar);
    case DataAtom::Kind::Member:
      return std::find(r->mset.begin(), r->mset.end(), l->scalar) != r->mset.end();
    case DataAtom::Kind::MsetEq: return l->mset == r->mset;
    case DataAtom::Kind::AllCmp: {
      std::vector<long long> ls = l->sort == Sort::Mset ? l->mset : std::vector<long long>{l->scalar};
      std::vector<long long> rs = r->sort == Sort::Mset ? r->mset : std::vector<long long>{r->scalar};
      for (long long x : ls)
        for (long long y : rs)
          if (!cmp(a.op, x, y)) return false;
      return true;
    }
  }
  return std::nullopt;
}

/// Multiset subtraction: out = a minus b when b is included in a.
std::optional<std::vector<long long>> mset_minus(const std::vector<long long>& a,
                                                 const std::vector<long long>& b) {
  std::vector<long long> out = a;
  for (long long x : b) {
    auto it = std::find(out.begin(), out.end(), x);
    if (it == out.end()) return std::nullopt;
    out.erase(it);
  }
  return out;
}

/// When one side of a multiset equality is fully known and the other is a
/// union with exactly one unknown leaf, that leaf is determined.
/// Returns 1 on progress, -1 on contradiction, 0 otherwise.
int solve_mset_difference(Env& env, const DataTerm& known_side, const Value& known,
                          const DataTerm& open_side) {
  (void)known_side;
  std::vector<long long> residual = known.mset;
  std::optional<Var> open_mset;   // unbound multiset variable leaf
  std::optional<Var> open_elem;   // unbound integer under a singleton
  int opens = 0;
  std::function<bool(const DataTerm&)> walk = [&](const DataTerm& t) -> bool {
    switch (t.kind()) {
      case DataTerm::Kind::EmptySet: return true;
      case DataTerm::Kind::Union: return walk(t.child0()) && walk(t.child1());
      case DataTerm::Kind::VarRef: {
        const Value* v = env.find(t.var_ref());
        if (v) {
          auto rest = mset_minus(residual, v->mset);
          if (!rest) return false;
          residual = *rest;
          return true;
        }
        ++opens;
        open_mset = t.var_ref();
        return true;
      }
      case DataTerm::Kind::Singleton: {
        auto v = eval_data_term(env, t.child0());
        if (v) {
          auto rest = mset_minus(residual, {v->scalar});
          if (!rest) return false;
          residual = *rest;
          return true;
        }
        if (t.child0().kind() != DataTerm::Kind::VarRef) return false;
        ++opens;
        open_elem = t.child0().var_ref();
        return true;
      }
      default: return false;
    }
  };
  if (!walk(open_side)) return -1;
  if (opens != 1) return 0;
  if (open_mset) {
    Value v{Sort::Mset, 0, residual};
    env.set(*open_mset, std::move(v));
    return 1;
  }
  if (residual.size() != 1) return -1;
  env.set(*open_elem, Value{Sort::Int, residual[0], {}});
  return 1;
}

/// -1 contradiction, 0 quiescent, 1 progress.
int propagate_pure_once(const PureFormula& pure, Env& env) {
  int changed = 0;
  for (const auto& e : pure.loc_eqs) {
    auto l = eval_loc_term(env, e.lhs);
    auto r = eval_loc_term(env, e.rhs);
    if (l && r) {
      if (!(*l == *r)) return -1;
    } else if (l && e.rhs.is_var()) {
      env.set(e.rhs.var(), *l);
      changed = 1;
    } else if (r && e.lhs.is_var()) {
      env.set(e.lhs.var(), *r);
      changed = 1;
    } else if (!l && !r && e.lhs.is_var() && e.rhs.is_var()) {
      if (env.rep(e.lhs.var()) != env.rep(e.rhs.var())) {
        if (!env.alias(e.lhs.var(), e.rhs.var())) return -1;
        changed = 1;
      }
    }
  }
  for (const auto& n : pure.loc_neqs) {
    auto l = eval_loc_term(env, n.lhs);
    auto r = eval_loc_term(env, n.rhs);
    if (l && r && *l == *r) return -1;
  }
  for (const auto& d : pure.data_atoms) {
    bool is_eq = (d.kind == DataAtom::Kind::MsetEq) ||
                 (d.kind == DataAtom::Kind::IntCmp && d.op == CmpOp::Eq);
    if (is_eq) {
      auto l = eval_data_term(env, d.lhs);
      auto r = eval_data_term(env, d.rhs);
      if (l && r) {
        if (!(*l == *r)) return -1;
        continue;
      }
      if (l && d.rhs.kind() == DataTerm::Kind::VarRef && !env.count(d.rhs.var_ref())) {
        env.set(d.rhs.var_ref(), *l);
        changed = 1;
      } else if (r && d.lhs.kind() == DataTerm::Kind::VarRef && !env.count(d.lhs.var_ref())) {
        env.set(d.lhs.var_ref(), *r);
        changed = 1;
      } else if (!l && !r && d.lhs.kind() == DataTerm::Kind::VarRef &&
                 d.rhs.kind() == DataTerm::Kind::VarRef) {
        if (env.rep(d.lhs.var_ref()) != env.rep(d.rhs.var_ref())) {
          if (!env.alias(d.lhs.var_ref(), d.rhs.var_ref())) return -1;
          changed = 1;
        }
      } else if (d.kind == DataAtom::Kind::MsetEq && (l || r)) {
        // difference rule: W = known ∪ u pins u to W minus the known parts
        int r2 = solve_mset_difference(env, l ? d.lhs : d.rhs, l ? *l : *r, l ? d.rhs : d.lhs);
        if (r2 != 0) {
          if (r2 < 0) return -1;
          changed = 1;
        }
      }
      continue;
    }
    auto v = eval_data_atom(env, d);
    if (v && !*v) return -1;
  }
  return changed;
}

/// Propagates to fixpoint; false on contradiction.
bool propagate_pure(const PureFormula& pure, Env& env) {
  for (;;) {
    int r = propagate_pure_once(pure, env);
    if (r < 0) return false;
    if (r == 0) return true;
  }
}

/// True when every atom is evaluable and holds.
std::optional<bool> check_pure(const PureFormula& pure, const Env& env) {
  bool all_known = true;
  for (const auto& e : pure.loc_eqs) {
    auto l = eval_loc_term(env, e.lhs);
    auto r = eval_loc_term(env, e.rhs);
    if (!l || !r) {
      all_known = false;
      continue;
    }
    if (!(*l == *r)) return false;
  }
  for (const auto& n : pure.loc_neqs) {
    auto l = eval_loc_term(env, n.lhs);
    auto r = eval_loc_term(env, n.rhs);
    if (!l || !r) {
      all_known = false;
      continue;
    }
    if (*l == *r) return false;
  }
  for (const auto& d : pure.data_atoms) {
    auto v = eval_data_atom(env, d);
    if (!v) {
      all_known = false;
      continue;
    }
    if (!*v) return false;
  }
  if (!all_known) return std::nullopt;
  return true;
}

// ---------------------------------------------------------------------------
// Directed satisfaction checker: predicate queries carry concrete argument
// values, rules are matched root-first, and rule existentials are solved by
// propagation plus residual-multiset splitting before any enumeration.

struct Checker {
  const DefMap& defs;
  const Bounds& bounds;
  const BoundedModel& model;
  long long* visits;

  std::vector<int> locs;
  std::map<int, int> loc_bit;
  std::map<Sort, std::vector<Value>> spaces;
  std::map<std::tuple<std::string, uint32_t, std::vector<Value>>, bool> memo;

  Checker(const DefMap& d, const Bounds& b, const BoundedModel& m, long long* v)
      : defs(d), bounds(b), model(m), visits(v) {
    for (const auto& [loc, cell] : m.heap) {
      loc_bit[loc] = static_cast<int>(locs.size());
      locs.push_back(loc);
    }
  }

  const std::vector<Value>& space(Sort s) {
    auto it = spaces.find(s);
    if (it == spaces.end()) it = spaces.emplace(s, space_of(s, bounds)).first;
    return it->second;
  }

  uint32_t full_mask() const { return locs.size() >= 32 ? 0 : (1u << locs.size()) - 1; }

  // -- formula-level checking

  bool check_heap(const SymbolicHeap& h, Env env) {
    for (const auto& v : free_vars(h))
      if (!env.count(v)) return false;
    return enumerate_exists(h, 0, std::move(env));
  }

  bool enumerate_exists(const SymbolicHeap& h, size_t idx, Env env) {
    if (idx == h.exists.size()) {
      auto pure_ok = check_pure(h.pure, env);
      if (!pure_ok.has_value() || !*pure_ok) return false;
      std::vector<SpatialAtom> atoms = h.spatial;
      std::sort(atoms.begin(), atoms.end(), spatial_less);
      return check_spatial(env, atoms, 0, full_mask());
    }
    const Var& v = h.exists[idx];
    if (env.count(v)) return enumerate_exists(h, idx + 1, std::move(env));
    for (const auto& val : space(v.sort)) {
      Env next = env;
      next.set(v, val);
      if (enumerate_exists(h, idx + 1, std::move(next))) return true;
    }
    return false;
  }

  bool check_spatial(const Env& env, const std::vector<SpatialAtom>& atoms, size_t idx,
                     uint32_t mask) {
    if (atoms.empty()) return mask == 0;
    if (idx + 1 == atoms.size()) return check_atom(env, atoms[idx], mask);
    uint32_t sub = mask;
    for (;;) {
      ++*visits;
      if (check_atom(env, atoms[idx], sub) && check_spatial(env, atoms, idx + 1, mask & ~sub))
        return true;
      if (sub == 0) break;
      sub = (sub - 1) & mask;
    }
    return false;
  }

  bool check_atom(const Env& env, const SpatialAtom& a, uint32_t mask) {
    if (const auto* p = std::get_if<PointsTo>(&a)) return check_cell(env, *p, mask);
    const auto& pa = std::get<PredAtom>(a);
    std::vector<Value> args;
    for (const auto& t : pa.args) {
      auto val = eval_term(env, t);
      if (!val) return false;
      args.push_back(*val);
    }
    return check_pred(pa.pred, args, mask);
  }

  bool check_cell(const Env& env, const PointsTo& p, uint32_t mask) {
    auto root = eval_loc_term(env, p.root);
    if (!root || root->scalar == 0) return false;
    auto bit = loc_bit.find(static_cast<int>(root->scalar));
    if (bit == loc_bit.end()) return false;
    if (mask != (1u << bit->second)) return false;
    const Cell& cell = model.heap.at(static_cast<int>(root->scalar));
    if (cell.size() != p.cells.size()) return false;
    for (const auto& [field, term] : p.cells) {
      auto it = cell.find(field);
      if (it == cell.end()) return false;
      auto val = eval_term(env, term);
      if (!val || !(*val == it->second)) return false;
    }
    return true;
  }

  // -- predicate satisfaction by least fixed point; the recursion descends
  // to strict submasks because each unfolding owns its root cell

  bool check_pred(const std::string& pred, const std::vector<Value>& args, uint32_t mask) {
    auto key = std::make_tuple(pred, mask, args);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    bool& slot = memo[key];  // value-initialized: cycles read as false
    const InductiveDef& def = defs.at(pred);
    bool ok = false;
    for (const auto& rule : def.rules) {
      if (check_rule(def, rule, args, mask)) {
        ok = true;
        break;
      }
    }
    return slot = ok;
  }

  bool check_rule(const InductiveDef& def, const Rule& rule, const std::vector<Value>& args,
                  uint32_t mask) {
    Env env;
    for (size_t i = 0; i < rule.params.size(); ++i) env.set(rule.params[i], args[i]);
    if (!propagate_pure(rule.pure, env)) return false;

    std::vector<const PointsTo*> cells;
    std::vector<const PredAtom*> preds;
    for (const auto& a : rule.spatial) {
      if (const auto* p = std::get_if<PointsTo>(&a))
        cells.push_back(p);
      else
        preds.push_back(&std::get<PredAtom>(a));
    }
    if (rule.kind() != RuleKind::Inductive && !preds.empty()) return false;
    return match_cells(rule, cells, preds, 0, mask, 0, std::move(env));
  }

  bool match_cells(const Rule& rule, std::vector<const PointsTo*> cells,
                   const std::vector<const PredAtom*>& preds, size_t idx, uint32_t mask,
                   uint32_t used, Env env) {
    if (idx == cells.size()) {
      if (!propagate_pure(rule.pure, env)) return false;
      return solve_exists(rule, preds, mask & ~used, std::move(env));
    }
    // take a spec whose root is already valued; rules in the fragment bind
    // every cell root by then
    size_t pick = idx;
    for (size_t j = idx; j < cells.size(); ++j) {
      if (eval_loc_term(env, cells[j]->root)) {
        pick = j;
        break;
      }
    }
    std::swap(cells[idx], cells[pick]);
    const PointsTo& spec = *cells[idx];
    auto root = eval_loc_term(env, spec.root);

    auto try_cell = [&](int loc, Env env2) -> bool {
      auto bit = loc_bit.find(loc);
      if (bit == loc_bit.end()) return false;
      uint32_t b = 1u << bit->second;
      if (!(mask & b) || (used & b)) return false;
      const Cell& cell = model.heap.at(loc);
      if (cell.size() != spec.cells.size()) return false;
      for (const auto& [field, term] : spec.cells) {
        auto it = cell.find(field);
        if (it == cell.end()) return false;
        auto val = eval_term(env2, term);
        if (val) {
          if (!(*val == it->second)) return false;
        } else {
          auto var = term.as_var();
          if (!var) return false;
          env2.set(*var, it->second);
        }
      }
      return match_cells(rule, cells, preds, idx + 1, mask, used | b, std::move(env2));
    };

    if (root) {
      if (root->scalar == 0) return false;
      return try_cell(static_cast<int>(root->scalar), env);
    }
    for (int loc : locs) {
      Env env2 = env;
      env2.set(spec.root.var(), Value{Sort::Loc, loc, {}});
      if (try_cell(loc, std::move(env2))) return true;
    }
    return false;
  }

  /// Rule existentials not pinned by the cells: first residual-multiset
  /// splitting over the rule equations, then full-space enumeration.
  bool solve_exists(const Rule& rule, const std::vector<const PredAtom*>& preds,
                    uint32_t remaining, Env env) {
    if (!propagate_pure(rule.pure, env)) return false;
    const Var* open = nullptr;
    for (const auto& z : rule.exists)
      if (!env.count(z)) {
        open = &z;
        break;
      }
    if (!open) {
      auto ok = check_pure(rule.pure, env);
      if (!ok.has_value() || !*ok) return false;
      return distribute_preds(preds, 0, remaining, std::move(env));
    }

    // residual split: a known multiset equated to a union of known parts
    // and unbound variables constrains those variables jointly
    for (const auto& d : rule.pure.data_atoms) {
      if (d.kind != DataAtom::Kind::MsetEq) continue;
      auto l = eval_data_term(env, d.lhs);
      auto r = eval_data_term(env, d.rhs);
      if (static_cast<bool>(l) == static_cast<bool>(r)) continue;
      const DataTerm& open_side = l ? d.rhs : d.lhs;
      std::vector<long long> residual = (l ? *l : *r).mset;
      std::vector<Var> unknown_sets;
      std::vector<Var> unknown_elems;
      bool shape_ok = true;
      std::function<void(const DataTerm&)> walk = [&](const DataTerm& t) {
        if (!shape_ok) return;
        switch (t.kind()) {
          case DataTerm::Kind::EmptySet: return;
          case DataTerm::Kind::Union:
            walk(t.child0());
            walk(t.child1());
            return;
          case DataTerm::Kind::VarRef: {
            const Value* v = env.find(t.var_ref());
            if (v) {
              auto rest = mset_minus(residual, v->mset);
              if (!rest) {
                shape_ok = false;
                return;
              }
              residual = *rest;
            } else {
              unknown_sets.push_back(t.var_ref());
            }
            return;
          }
          case DataTerm::Kind::Singleton: {
            auto v = eval_data_term(env, t.child0());
            if (v) {
              auto rest = mset_minus(residual, {v->scalar});
              if (!rest) {
                shape_ok = false;
                return;
              }
              residual = *rest;
            } else if (t.child0().kind() == DataTerm::Kind::VarRef) {
              unknown_elems.push_back(t.child0().var_ref());
            } else {
              shape_ok = false;
            }
            return;
          }
          default: shape_ok = false;
        }
      };
      walk(open_side);
      if (!shape_ok || unknown_sets.size() + unknown_elems.size() < 2) continue;
      return split_residual(rule, preds, remaining, env, residual, unknown_elems, unknown_sets);
    }

    // fallback: plain enumeration of the open existential
    for (const auto& val : space(open->sort)) {
      Env next = env;
      next.set(*open, val);
      if (solve_exists(rule, preds, remaining, std::move(next))) return true;
    }
    return false;
  }

  bool split_residual(const Rule& rule, const std::vector<const PredAtom*>& preds,
                      uint32_t remaining, const Env& env, const std::vector<long long>& residual,
                      std::vector<Var> elems, std::vector<Var> sets) {
    if (!elems.empty()) {
      Var v = elems.back();
      elems.pop_back();
      std::set<long long> tried;
      for (size_t i = 0; i < residual.size(); ++i) {
        if (!tried.insert(residual[i]).second) continue;
        Env next = env;
        next.set(v, Value{Sort::Int, residual[i], {}});
        std::vector<long long> rest = residual;
        rest.erase(rest.begin() + static_cast<long>(i));
        if (split_residual(rule, preds, remaining, next, rest, elems, sets)) return true;
      }
      return false;
    }
    if (sets.size() == 1) {
      Env next = env;
      next.set(sets[0], Value{Sort::Mset, 0, residual});
      return solve_exists(rule, preds, remaining, std::move(next));
    }
    if (sets.empty()) {
      if (!residual.empty()) return false;
      Env next = env;
      return solve_exists(rule, preds, remaining, std::move(next));
    }
    // two or more open sets: enumerate which part the first one takes
    Var v = sets.back();
    sets.pop_back();
    std::vector<std::vector<long long>> subs = submultisets(residual);
    for (const auto& take : subs) {
      auto rest = mset_minus(residual, take);
      if (!rest) continue;
      Env next = env;
      next.set(v, Value{Sort::Mset, 0, take});
      if (split_residual(rule, preds, remaining, next, *rest, elems, sets)) return true;
    }
    return false;
  }

  static std::vector<std::vector<long long>> submultisets(const std::vector<long long>& m) {
    // counts per distinct element
    std::map<long long, int> counts;
    for (long long x : m) ++counts[x];
    std::vector<std::vector<long long>> out{{}};
    for (const auto& [x, n] : counts) {
      std::vector<std::vector<long long>> next;
      for (const auto& base : out) {
        for (int k = 0; k <= n; ++k) {
          std::vector<long long> s = base;
          for (int i = 0; i < k; ++i) s.push_back(x);
          next.push_back(std::move(s));
        }
      }
      out = std::move(next);
    }
    for (auto& s : out) std::sort(s.begin(), s.end());
    return out;
  }

  bool distribute_preds(const std::vector<const PredAtom*>& preds, size_t idx, uint32_t remaining,
                        Env env) {
    if (idx == preds.size()) return remaining == 0;
    const PredAtom& atom = *preds[idx];
    std::vector<Value> args;
    for (const auto& t : atom.args) {
      auto val = eval_term(env, t);
      if (!val) return false;  // unresolved argument: no satisfying unfolding found
      args.push_back(*val);
    }
    if (idx + 1 == preds.size())
      return check_pred(atom.pred, args, remaining) && distribute_preds(preds, idx + 1, 0, env);
    uint32_t sub = remaining;
    for (;;) {
      if (check_pred(atom.pred, args, sub) &&
          distribute_preds(preds, idx + 1, remaining & ~sub, env))
        return true;
      if (sub == 0) break;
      sub = (sub - 1) & remaining;
    }
    return false;
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// Oracle interface

bool Oracle::satisfies(const BoundedModel& m, const SymbolicHeap& h) const {
  Checker checker(defs_, bounds_, m, &partition_visits);
  return checker.check_heap(h, Env(m.stack));
}

namespace {

// Constructive enumeration of the models of a quantifier-free symbolic heap.
struct Generator {
  const DefMap& defs;
  const Bounds& bounds;
  std::map<Sort, std::vector<Value>> spaces;
  int fresh_counter = 0;

  struct State {
    Env env;
    std::map<int, Cell> heap;
    std::vector<PureFormula> deferred;  // constraints waiting on unbound vars
    std::vector<Var> pending;           // rule existentials left unbound
  };

  Generator(const DefMap& d, const Bounds& b) : defs(d), bounds(b) {}

  const std::vector<Value>& space(Sort s) {
    auto it = spaces.find(s);
    if (it == spaces.end()) it = spaces.emplace(s, space_of(s, bounds)).first;
    return it->second;
  }

  int next_free_loc(const State& st) const {
    for (int i = 1; i <= bounds.loc_universe; ++i)
      if (!st.heap.count(i)) return i;
    return -1;
  }

  /// yield returns true to stop the whole enumeration.
  bool run(const SymbolicHeap& h, const std::vector<Var>& extra_vars,
           const std::function<bool(const State&)>& yield) {
    State st;
    if (!propagate_pure(h.pure, st.env)) return false;
    std::vector<SpatialAtom> atoms = h.spatial;
    // predicate atoms first: they bind their own roots, so cells rarely
    // have to guess targets
    std::stable_sort(atoms.begin(), atoms.end(), [](const SpatialAtom& a, const SpatialAtom& b) {
      return a.index() > b.index();
    });
    std::vector<Var> finals;
    for (const auto& v : free_vars(h)) finals.push_back(v);
    for (const auto& v : extra_vars)
      if (std::find(finals.begin(), finals.end(), v) == finals.end()) finals.push_back(v);
    return gen_atoms(atoms, 0, st, [&](State& done) {
      return finish(h.pure, finals, done, yield);
    }, 0);
  }

  /// Alternates deferred-constraint propagation with enumeration of the
  /// remaining unknowns, so ports chosen late still feed the equations that
  /// were recorded deep inside the unfolding.
  bool finish(const PureFormula& formula_pure, const std::vector<Var>& finals, State st,
              const std::function<bool(const State&)>& yield) {
    for (;;) {
      bool progress = false;
      if (!propagate_pure(formula_pure, st.env)) return false;
      for (const auto& d : st.deferred) {
        int r = 1;
        while (r == 1) {
          r = propagate_pure_once(d, st.env);
          if (r == -1) return false;
          progress |= r == 1;
        }
      }
      if (!progress) break;
    }
    // variables standing alone on one side of a deferred equation are
    // computed by propagation once their defining side resolves; enumerate
    // the genuinely free choices first
    std::set<Var> derived;
    auto note_derived = [&](const PureFormula& p) {
      for (const auto& d : p.data_atoms) {
        if (d.kind != DataAtom::Kind::MsetEq &&
            !(d.kind == DataAtom::Kind::IntCmp && d.op == CmpOp::Eq))
          continue;
        for (const DataTerm* side : {&d.lhs, &d.rhs}) {
          if (side->kind() == DataTerm::Kind::VarRef && !st.env.count(side->var_ref()))
            derived.insert(st.env.rep(side->var_ref()));
        }
      }
    };
    for (const auto& d : st.deferred) note_derived(d);
    note_derived(formula_pure);

    const Var* open = nullptr;
    const Var* open_derived = nullptr;
    auto consider = [&](const Var& v) {
      if (st.env.count(v)) return;
      if (derived.count(st.env.rep(v))) {
        if (!open_derived) open_derived = &v;
      } else if (!open) {
        open = &v;
      }
    };
    for (const auto& v : finals) consider(v);
    for (const auto& v : st.pending) consider(v);
    if (!open) open = open_derived;
    if (open) {
      Var v = *open;
      for (const auto& val : space(v.sort)) {
        State next = st;
        next.env.set(v, val);
        if (finish(formula_pure, finals, std::move(next), yield)) return true;
      }
      return false;
    }
    auto ok = check_pure(formula_pure, st.env);
    if (!ok.has_value() || !*ok) return false;
    for (const auto& d : st.deferred) {
      auto r = check_pure(d, st.env);
      if (!r.has_value() || !*r) return false;
    }
    return yield(st);
  }

  bool gen_atoms(const std::vector<SpatialAtom>& atoms, size_t idx, State st,
                 const std::function<bool(State&)>& k, int depth) {
    if (idx == atoms.size()) return k(st);
    auto next = [&, idx, depth](State& st2) { return gen_atoms(atoms, idx + 1, st2, k, depth); };
    if (const auto* p = std::get_if<PointsTo>(&atoms[idx])) return gen_cell(*p, std::move(st), next);
    return gen_pred(std::get<PredAtom>(atoms[idx]), std::move(st), next, depth);
  }

  bool gen_cell(const PointsTo& spec, State st, const std::function<bool(State&)>& k) {
    if (static_cast<int>(st.heap.size()) >= bounds.max_cells) return false;
    int loc;
    auto root = eval_loc_term(st.env, spec.root);
    if (root) {
      loc = static_cast<int>(root->scalar);
      if (loc == 0 || loc > bounds.loc_universe || st.heap.count(loc)) return false;
    } else {
      loc = next_free_loc(st);
      if (loc < 0) return false;
      st.env.set(spec.root.var(), Value{Sort::Loc, loc, {}});
    }
    st.heap.emplace(loc, Cell{});
    std::vector<std::pair<std::string, Term>> fields(spec.cells.begin(), spec.cells.end());
    return fill_fields(spec, fields, 0, loc, std::move(st), k);
  }

  bool fill_fields(const PointsTo& spec, const std::vector<std::pair<std::string, Term>>& fields,
                   size_t idx, int loc, State st, const std::function<bool(State&)>& k) {
    if (idx == fields.size()) return k(st);
    const auto& [name, term] = fields[idx];
    auto val = eval_term(st.env, term);
    if (val) {
      st.heap[loc][name] = *val;
      return fill_fields(spec, fields, idx + 1, loc, std::move(st), k);
    }
    auto var = term.as_var();
    if (!var) return false;  // compound unevaluable targets do not occur in cells
    for (const auto& v : space(var->sort)) {
      State next = st;
      next.env.set(*var, v);
      next.heap[loc][name] = v;
      if (fill_fields(spec, fields, idx + 1, loc, std::move(next), k)) return true;
    }
    return false;
  }

  bool gen_pred(const PredAtom& atom, State st, const std::function<bool(State&)>& k, int depth) {
    // every inductive unfolding step owns at least one cell, so nesting
    // deeper than the cell budget cannot complete
    if (depth > bounds.max_cells) return false;
    auto it = defs.find(atom.pred);
    if (it == defs.end()) throw SlentError("unknown predicate " + atom.pred);
    const InductiveDef& def = it->second;
    for (const auto& rule : def.rules) {
      // instantiate the rule: parameters become the argument terms,
      // existentials become fresh generator-scoped variables
      Subst inst;
      for (size_t i = 0; i < def.params.size(); ++i) inst.bind(def.params[i], atom.args[i]);
      std::vector<Var> fresh;
      int base = fresh_counter;
      fresh_counter += static_cast<int>(rule.exists.size());
      for (size_t i = 0; i < rule.exists.size(); ++i) {
        Var f{"%o" + std::to_string(base + static_cast<int>(i)) + "_" + rule.exists[i].name,
              rule.exists[i].sort};
        inst.bind(rule.exists[i], Term::of(f));
        fresh.push_back(f);
      }
      PureFormula pure = inst(rule.pure);
      std::vector<SpatialAtom> body = inst(rule.spatial);
      std::stable_sort(body.begin(), body.end(), [](const SpatialAtom& a, const SpatialAtom& b) {
        return a.index() > b.index();  // predicates first
      });
      State branch = st;
      if (!propagate_pure(pure, branch.env)) continue;
      int next_depth = rule.kind() == RuleKind::Inductive ? depth + 1 : depth;
      bool stopped = gen_atoms(body, 0, std::move(branch), [&](State& st2) {
        return close_rule(pure, fresh, st2, k);
      }, next_depth);
      if (stopped) return true;
    }
    return false;
  }

  /// Binds leftover rule existentials and checks the instantiated pure part;
  /// constraints still mentioning unbound outer variables are deferred.
  bool close_rule(const PureFormula& pure, const std::vector<Var>& fresh, State st,
                  const std::function<bool(State&)>& k) {
    if (!propagate_pure(pure, st.env)) return false;
    for (const auto& v : fresh) {
      if (st.env.count(v)) continue;
      st.pending.push_back(v);
    }
    auto ok = check_pure(pure, st.env);
    if (ok.has_value()) {
      if (!*ok) return false;
    } else {
      st.deferred.push_back(pure);  // outer variables still unbound
    }
    return k(st);
  }
};

}  // namespace

std::optional<BoundedModel> Oracle::refute_entailment(const Formula& lhs,
                                                      const Formula& rhs) const {
  std::set<Var> rhs_free;
  for (const auto& d : rhs.disjuncts)
    for (const auto& v : free_vars(d)) rhs_free.insert(v);

  std::optional<BoundedModel> counter;
  for (const auto& disjunct : lhs.disjuncts) {
    if (counter) break;
    std::vector<Var> extra(rhs_free.begin(), rhs_free.end());
    Generator gen(defs_, bounds_);
    // candidates arrive in runs over the same heap: keep one checker per
    // heap so predicate sub-results carry across the stack enumeration
    std::unique_ptr<Checker> checker;
    BoundedModel current;
    gen.run(disjunct, extra, [&](const Generator::State& st) {
      BoundedModel m;
      m.heap = st.heap;
      std::set<Var> keep = free_vars(disjunct);
      for (const auto& v : rhs_free) keep.insert(v);
      for (const auto& v : keep) {
        const Value* val = st.env.find(v);
        if (!val) return false;  // incomplete candidate
        m.stack.emplace(v, *val);
      }
      if (!checker || !(current.heap == m.heap)) {
        current = m;
        checker = std::make_unique<Checker>(defs_, bounds_, current, &partition_visits);
      }
      // re-verify the candidate before trusting it
      if (!checker->check_heap(disjunct, Env(m.stack))) return false;
      for (const auto& rd : rhs.disjuncts)
        if (checker->check_heap(rd, Env(m.stack))) return false;
      counter = std::move(m);
      return true;
    });
  }
  return counter;
}

std::optional<BoundedModel> Oracle::check_lemma(const Lemma& l) const {
  SymbolicHeap premise;
  premise.pure = l.premise_pure;
  premise.spatial = l.premise_root;
  premise.spatial.insert(premise.spatial.end(), l.premise_rest.begin(), l.premise_rest.end());
  // premise existentials enumerate on the left: the generator treats them
  // as ordinary variables to solve for
  SymbolicHeap conclusion;
  conclusion.spatial.push_back(l.conclusion);

  Formula lhs{{premise}};
  Formula rhs{{conclusion}};
  auto counter = refute_entailment(lhs, rhs);
  if (!counter) return std::nullopt;
  return counter;
}

}  // namespace slent
