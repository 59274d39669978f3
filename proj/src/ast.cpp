#include "slent/ast.hpp"

#include <algorithm>
#include <sstream>

namespace slent {

const char* sort_name(Sort s) {
  switch (s) {
    case Sort::Loc: return "Loc";
    case Sort::Int: return "Int";
    case Sort::Mset: return "Mset";
  }
  return "?";
}

const char* cmp_op_name(CmpOp op) {
  switch (op) {
    case CmpOp::Eq: return "=";
    case CmpOp::Ne: return "distinct";
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// LocTerm

LocTerm LocTerm::of(Var v) {
  if (v.sort != Sort::Loc) throw SortError("location term from non-Loc variable " + v.name);
  LocTerm t;
  t.var_ = std::move(v);
  return t;
}

const Var& LocTerm::var() const {
  if (!var_) throw SlentError("nil has no variable");
  return *var_;
}

// ---------------------------------------------------------------------------
// DataTerm

struct DataTerm::Node {
  Kind kind;
  Sort sort;
  Var var;           // VarRef
  long long lit = 0;  // IntLit
  std::shared_ptr<const Node> a, b;
};

DataTerm DataTerm::var(Var v) {
  if (v.sort == Sort::Loc) throw SortError("data term from Loc variable " + v.name);
  auto n = std::make_shared<Node>();
  n->kind = Kind::VarRef;
  n->sort = v.sort;
  n->var = std::move(v);
  return DataTerm(std::move(n));
}

DataTerm DataTerm::lit(long long v) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::IntLit;
  n->sort = Sort::Int;
  n->lit = v;
  return DataTerm(std::move(n));
}

DataTerm DataTerm::add(DataTerm a, DataTerm b) {
  if (a.sort() != Sort::Int || b.sort() != Sort::Int) throw SortError("+ expects Int operands");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Add;
  n->sort = Sort::Int;
  n->a = a.node_;
  n->b = b.node_;
  return DataTerm(std::move(n));
}

DataTerm DataTerm::neg(DataTerm a) {
  if (a.sort() != Sort::Int) throw SortError("- expects an Int operand");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Neg;
  n->sort = Sort::Int;
  n->a = a.node_;
  return DataTerm(std::move(n));
}

DataTerm DataTerm::empty_set() {
  auto n = std::make_shared<Node>();
  n->kind = Kind::EmptySet;
  n->sort = Sort::Mset;
  return DataTerm(std::move(n));
}

DataTerm DataTerm::singleton(DataTerm elem) {
  if (elem.sort() != Sort::Int) throw SortError("set elements must be Int");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Singleton;
  n->sort = Sort::Mset;
  n->a = elem.node_;
  return DataTerm(std::move(n));
}

DataTerm DataTerm::mset_union(DataTerm a, DataTerm b) {
  if (a.sort() != Sort::Mset || b.sort() != Sort::Mset) throw SortError("union expects Mset operands");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Union;
  n->sort = Sort::Mset;
  n->a = a.node_;
  n->b = b.node_;
  return DataTerm(std::move(n));
}

DataTerm::Kind DataTerm::kind() const { return node_->kind; }
Sort DataTerm::sort() const { return node_->sort; }

const Var& DataTerm::var_ref() const {
  if (node_->kind != Kind::VarRef) throw SlentError("not a variable reference");
  return node_->var;
}

long long DataTerm::value() const {
  if (node_->kind != Kind::IntLit) throw SlentError("not an integer literal");
  return node_->lit;
}

DataTerm DataTerm::child0() const { return DataTerm(node_->a); }

DataTerm DataTerm::child1() const { return DataTerm(node_->b); }

int compare(const DataTerm& a, const DataTerm& b) {
  if (a.node_ == b.node_) return 0;
  auto ka = static_cast<int>(a.node_->kind);
  auto kb = static_cast<int>(b.node_->kind);
  if (ka != kb) return ka < kb ? -1 : 1;
  const auto& na = *a.node_;
  const auto& nb = *b.node_;
  switch (na.kind) {
    case DataTerm::Kind::VarRef:
      if (na.var != nb.var) return na.var < nb.var ? -1 : 1;
      return 0;
    case DataTerm::Kind::IntLit:
      if (na.lit != nb.lit) return na.lit < nb.lit ? -1 : 1;
      return 0;
    case DataTerm::Kind::EmptySet:
      return 0;
    case DataTerm::Kind::Neg:
    case DataTerm::Kind::Singleton:
      return compare(DataTerm(na.a), DataTerm(nb.a));
    case DataTerm::Kind::Add:
    case DataTerm::Kind::Union: {
      int c = compare(DataTerm(na.a), DataTerm(nb.a));
      if (c != 0) return c;
      return compare(DataTerm(na.b), DataTerm(nb.b));
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Term

Term Term::of(Var v) {
  if (v.sort == Sort::Loc) return Term(LocTerm::of(std::move(v)));
  return Term(DataTerm::var(std::move(v)));
}

Sort Term::sort() const {
  if (is_loc()) return Sort::Loc;
  return data().sort();
}

std::optional<Var> Term::as_var() const {
  if (is_loc()) {
    if (loc().is_var()) return loc().var();
    return std::nullopt;
  }
  if (data().kind() == DataTerm::Kind::VarRef) return data().var_ref();
  return std::nullopt;
}

int compare(const Term& a, const Term& b) {
  if (a.is_loc() != b.is_loc()) return a.is_loc() ? -1 : 1;
  if (a.is_loc()) {
    if (a.loc() != b.loc()) return a.loc() < b.loc() ? -1 : 1;
    return 0;
  }
  return compare(a.data(), b.data());
}

// ---------------------------------------------------------------------------
// DataAtom

DataAtom DataAtom::int_cmp(CmpOp op, DataTerm a, DataTerm b) {
  if (a.sort() != Sort::Int || b.sort() != Sort::Int)
    throw SortError("integer comparison over non-Int terms");
  return DataAtom{Kind::IntCmp, op, std::move(a), std::move(b)};
}

DataAtom DataAtom::member(DataTerm elem, DataTerm mset) {
  if (elem.sort() != Sort::Int) throw SortError("member element must be Int");
  if (mset.sort() != Sort::Mset) throw SortError("member right-hand side must be Mset");
  return DataAtom{Kind::Member, CmpOp::Eq, std::move(elem), std::move(mset)};
}

DataAtom DataAtom::mset_eq(DataTerm a, DataTerm b) {
  if (a.sort() != Sort::Mset || b.sort() != Sort::Mset)
    throw SortError("multiset equality over non-Mset terms");
  return DataAtom{Kind::MsetEq, CmpOp::Eq, std::move(a), std::move(b)};
}

DataAtom DataAtom::all_cmp(CmpOp op, DataTerm a, DataTerm b) {
  if (op != CmpOp::Lt && op != CmpOp::Le) throw SortError("all-element comparison must be < or <=");
  if (a.sort() != Sort::Mset && b.sort() != Sort::Mset)
    throw SortError("all-element comparison needs a Mset side");
  return DataAtom{Kind::AllCmp, op, std::move(a), std::move(b)};
}

int compare(const DataAtom& a, const DataAtom& b) {
  if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind) ? -1 : 1;
  if (a.op != b.op) return static_cast<int>(a.op) < static_cast<int>(b.op) ? -1 : 1;
  int c = compare(a.lhs, b.lhs);
  if (c != 0) return c;
  return compare(a.rhs, b.rhs);
}

// ---------------------------------------------------------------------------
// PureFormula

void PureFormula::add_loc_eq(LocTerm a, LocTerm b) {
  LocRel r{std::move(a), std::move(b)};
  if (std::find(loc_eqs.begin(), loc_eqs.end(), r) == loc_eqs.end()) loc_eqs.push_back(r);
}

void PureFormula::add_loc_neq(LocTerm a, LocTerm b) {
  LocRel r{std::move(a), std::move(b)};
  LocRel rs{r.rhs, r.lhs};
  if (std::find(loc_neqs.begin(), loc_neqs.end(), r) == loc_neqs.end() &&
      std::find(loc_neqs.begin(), loc_neqs.end(), rs) == loc_neqs.end())
    loc_neqs.push_back(r);
}

void PureFormula::add_data(DataAtom a) {
  if (std::find(data_atoms.begin(), data_atoms.end(), a) == data_atoms.end())
    data_atoms.push_back(std::move(a));
}

void PureFormula::append(const PureFormula& other) {
  for (const auto& e : other.loc_eqs) add_loc_eq(e.lhs, e.rhs);
  for (const auto& n : other.loc_neqs) add_loc_neq(n.lhs, n.rhs);
  for (const auto& d : other.data_atoms) add_data(d);
}

void PureFormula::sort_canonical() {
  std::sort(loc_eqs.begin(), loc_eqs.end());
  std::sort(loc_neqs.begin(), loc_neqs.end());
  std::sort(data_atoms.begin(), data_atoms.end(),
            [](const DataAtom& a, const DataAtom& b) { return compare(a, b) < 0; });
}

int compare(const PureFormula& a, const PureFormula& b) {
  auto cmp_rels = [](const std::vector<LocRel>& x, const std::vector<LocRel>& y) {
    if (x.size() != y.size()) return x.size() < y.size() ? -1 : 1;
    for (size_t i = 0; i < x.size(); ++i)
      if (x[i] != y[i]) return x[i] < y[i] ? -1 : 1;
    return 0;
  };
  int c = cmp_rels(a.loc_eqs, b.loc_eqs);
  if (c != 0) return c;
  c = cmp_rels(a.loc_neqs, b.loc_neqs);
  if (c != 0) return c;
  if (a.data_atoms.size() != b.data_atoms.size())
    return a.data_atoms.size() < b.data_atoms.size() ? -1 : 1;
  for (size_t i = 0; i < a.data_atoms.size(); ++i) {
    c = compare(a.data_atoms[i], b.data_atoms[i]);
    if (c != 0) return c;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Spatial atoms

int compare(const PointsTo& a, const PointsTo& b) {
  if (a.root != b.root) return a.root < b.root ? -1 : 1;
  if (a.cells.size() != b.cells.size()) return a.cells.size() < b.cells.size() ? -1 : 1;
  auto ia = a.cells.begin();
  auto ib = b.cells.begin();
  for (; ia != a.cells.end(); ++ia, ++ib) {
    if (ia->first != ib->first) return ia->first < ib->first ? -1 : 1;
    int c = compare(ia->second, ib->second);
    if (c != 0) return c;
  }
  return 0;
}

int compare(const PredAtom& a, const PredAtom& b) {
  if (a.pred != b.pred) return a.pred < b.pred ? -1 : 1;
  if (a.args.size() != b.args.size()) return a.args.size() < b.args.size() ? -1 : 1;
  for (size_t i = 0; i < a.args.size(); ++i) {
    int c = compare(a.args[i], b.args[i]);
    if (c != 0) return c;
  }
  return 0;
}

int compare(const SpatialAtom& a, const SpatialAtom& b) {
  // points-to atoms order before predicate atoms
  if (a.index() != b.index()) return a.index() < b.index() ? -1 : 1;
  if (std::holds_alternative<PointsTo>(a))
    return compare(std::get<PointsTo>(a), std::get<PointsTo>(b));
  return compare(std::get<PredAtom>(a), std::get<PredAtom>(b));
}

bool spatial_less(const SpatialAtom& a, const SpatialAtom& b) { return compare(a, b) < 0; }

LocTerm spatial_root(const SpatialAtom& a) {
  if (const auto* p = std::get_if<PointsTo>(&a)) return p->root;
  const auto& pa = std::get<PredAtom>(a);
  if (pa.args.empty() || !pa.args[0].is_loc())
    throw SlentError("predicate atom " + pa.pred + " has no location root");
  return pa.args[0].loc();
}

int compare(const SymbolicHeap& a, const SymbolicHeap& b) {
  if (a.exists.size() != b.exists.size()) return a.exists.size() < b.exists.size() ? -1 : 1;
  for (size_t i = 0; i < a.exists.size(); ++i)
    if (a.exists[i] != b.exists[i]) return a.exists[i] < b.exists[i] ? -1 : 1;
  int c = compare(a.pure, b.pure);
  if (c != 0) return c;
  if (a.spatial.size() != b.spatial.size()) return a.spatial.size() < b.spatial.size() ? -1 : 1;
  for (size_t i = 0; i < a.spatial.size(); ++i) {
    c = compare(a.spatial[i], b.spatial[i]);
    if (c != 0) return c;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Rules

RuleKind Rule::kind() const {
  bool has_pred = false;
  for (const auto& a : spatial)
    if (std::holds_alternative<PredAtom>(a)) has_pred = true;
  if (has_pred) return RuleKind::Inductive;
  return spatial.empty() ? RuleKind::BaseEmpty : RuleKind::BaseNonEmpty;
}

// ---------------------------------------------------------------------------
// Gaifman graph

bool GaifmanGraph::has_outgoing(const LocTerm& v) const {
  for (const auto& [from, to] : arcs)
    if (from == v) return true;
  return false;
}

bool GaifmanGraph::connected_dag_rooted_at(const LocTerm& root) const {
  if (vertices.empty()) return true;
  if (!vertices.count(root)) return false;
  // DFS from root: all vertices reachable, no back edge to the active path.
  std::map<LocTerm, int> state;  // 0 unseen, 1 active, 2 done
  bool cyclic = false;
  auto dfs = [&](auto&& self, const LocTerm& v) -> void {
    state[v] = 1;
    for (const auto& [from, to] : arcs) {
      if (from != v) continue;
      int s = state.count(to) ? state[to] : 0;
      if (s == 1) {
        cyclic = true;
      } else if (s == 0) {
        self(self, to);
      }
    }
    state[v] = 2;
  };
  dfs(dfs, root);
  if (cyclic) return false;
  for (const auto& v : vertices)
    if (!state.count(v)) return false;
  return true;
}

GaifmanGraph gaifman_graph(const std::vector<SpatialAtom>& points_tos) {
  GaifmanGraph g;
  for (const auto& a : points_tos) {
    const auto* p = std::get_if<PointsTo>(&a);
    if (!p) throw SlentError("gaifman_graph expects points-to atoms only");
    g.vertices.insert(p->root);
    for (const auto& [field, target] : p->cells) {
      if (!target.is_loc()) continue;
      g.vertices.insert(target.loc());
      g.arcs.insert({p->root, target.loc()});
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Free variables

static void collect(const DataTerm& t, std::set<Var>& out) {
  switch (t.kind()) {
    case DataTerm::Kind::VarRef: out.insert(t.var_ref()); break;
    case DataTerm::Kind::IntLit:
    case DataTerm::Kind::EmptySet: break;
    case DataTerm::Kind::Neg:
    case DataTerm::Kind::Singleton: collect(t.child0(), out); break;
    case DataTerm::Kind::Add:
    case DataTerm::Kind::Union:
      collect(t.child0(), out);
      collect(t.child1(), out);
      break;
  }
}

static void collect(const Term& t, std::set<Var>& out) {
  if (t.is_loc()) {
    if (t.loc().is_var()) out.insert(t.loc().var());
  } else {
    collect(t.data(), out);
  }
}

static void collect(const DataAtom& a, std::set<Var>& out) {
  collect(a.lhs, out);
  collect(a.rhs, out);
}

static void collect(const PureFormula& p, std::set<Var>& out) {
  auto rel = [&](const LocRel& r) {
    if (r.lhs.is_var()) out.insert(r.lhs.var());
    if (r.rhs.is_var()) out.insert(r.rhs.var());
  };
  for (const auto& e : p.loc_eqs) rel(e);
  for (const auto& n : p.loc_neqs) rel(n);
  for (const auto& d : p.data_atoms) collect(d, out);
}

static void collect(const SpatialAtom& a, std::set<Var>& out) {
  if (const auto* p = std::get_if<PointsTo>(&a)) {
    if (p->root.is_var()) out.insert(p->root.var());
    for (const auto& [f, t] : p->cells) collect(t, out);
  } else {
    for (const auto& t : std::get<PredAtom>(a).args) collect(t, out);
  }
}

std::set<Var> free_vars(const DataTerm& t) {
  std::set<Var> s;
  collect(t, s);
  return s;
}

std::set<Var> free_vars(const Term& t) {
  std::set<Var> s;
  collect(t, s);
  return s;
}

std::set<Var> free_vars(const DataAtom& a) {
  std::set<Var> s;
  collect(a, s);
  return s;
}

std::set<Var> free_vars(const PureFormula& p) {
  std::set<Var> s;
  collect(p, s);
  return s;
}

std::set<Var> free_vars(const SpatialAtom& a) {
  std::set<Var> s;
  collect(a, s);
  return s;
}

std::set<Var> free_vars(const std::vector<SpatialAtom>& atoms) {
  std::set<Var> s;
  for (const auto& a : atoms) collect(a, s);
  return s;
}

std::set<Var> free_vars(const SymbolicHeap& h) {
  std::set<Var> s;
  collect(h.pure, s);
  for (const auto& a : h.spatial) collect(a, s);
  for (const auto& b : h.exists) s.erase(b);
  return s;
}

// ---------------------------------------------------------------------------
// Substitution

const Term* Subst::find(const Var& v) const {
  auto it = map_.find(v);
  return it == map_.end() ? nullptr : &it->second;
}

void Subst::bind(const Var& v, Term t) {
  if (t.sort() != v.sort)
    throw SortError("binding " + v.name + ":" + sort_name(v.sort) + " to a " +
                    sort_name(t.sort()) + " term");
  auto it = map_.find(v);
  if (it != map_.end()) {
    if (!(it->second == t)) throw SlentError("conflicting bindings for " + v.name);
    return;
  }
  map_.emplace(v, std::move(t));
}

void Subst::merge(const Subst& other) {
  for (const auto& [v, t] : other.map_) bind(v, t);
}

LocTerm Subst::operator()(const LocTerm& t) const {
  if (t.is_nil()) return t;
  const Term* r = find(t.var());
  if (!r) return t;
  if (!r->is_loc()) throw SortError("location variable bound to a data term");
  return r->loc();
}

DataTerm Subst::operator()(const DataTerm& t) const {
  switch (t.kind()) {
    case DataTerm::Kind::VarRef: {
      const Term* r = find(t.var_ref());
      if (!r) return t;
      if (r->is_loc()) throw SortError("data variable bound to a location term");
      return r->data();
    }
    case DataTerm::Kind::IntLit:
    case DataTerm::Kind::EmptySet:
      return t;
    case DataTerm::Kind::Neg:
      return DataTerm::neg((*this)(t.child0()));
    case DataTerm::Kind::Singleton:
      return DataTerm::singleton((*this)(t.child0()));
    case DataTerm::Kind::Add:
      return DataTerm::add((*this)(t.child0()), (*this)(t.child1()));
    case DataTerm::Kind::Union:
      return DataTerm::mset_union((*this)(t.child0()), (*this)(t.child1()));
  }
  return t;
}

Term Subst::operator()(const Term& t) const {
  if (t.is_loc()) return Term((*this)(t.loc()));
  return Term((*this)(t.data()));
}

DataAtom Subst::operator()(const DataAtom& a) const {
  DataAtom r = a;
  r.lhs = (*this)(a.lhs);
  r.rhs = (*this)(a.rhs);
  return r;
}

PureFormula Subst::operator()(const PureFormula& p) const {
  PureFormula r;
  for (const auto& e : p.loc_eqs) r.add_loc_eq((*this)(e.lhs), (*this)(e.rhs));
  for (const auto& n : p.loc_neqs) r.add_loc_neq((*this)(n.lhs), (*this)(n.rhs));
  for (const auto& d : p.data_atoms) r.add_data((*this)(d));
  return r;
}

SpatialAtom Subst::operator()(const SpatialAtom& a) const {
  if (const auto* p = std::get_if<PointsTo>(&a)) {
    PointsTo r;
    r.root = (*this)(p->root);
    for (const auto& [f, t] : p->cells) r.cells.emplace(f, (*this)(t));
    return r;
  }
  const auto& pa = std::get<PredAtom>(a);
  PredAtom r;
  r.pred = pa.pred;
  for (const auto& t : pa.args) r.args.push_back((*this)(t));
  return r;
}

std::vector<SpatialAtom> Subst::operator()(const std::vector<SpatialAtom>& v) const {
  std::vector<SpatialAtom> r;
  r.reserve(v.size());
  for (const auto& a : v) r.push_back((*this)(a));
  return r;
}

SymbolicHeap Subst::operator()(const SymbolicHeap& h) const {
  // Capture avoidance: rename binders that clash with the substitution's
  // domain or with free variables of its range.
  std::set<Var> avoid;
  for (const auto& [v, t] : map_) {
    avoid.insert(v);
    for (const auto& fv : free_vars(t)) avoid.insert(fv);
  }
  Subst renaming;
  std::vector<Var> new_binders;
  int counter = 0;
  std::set<Var> taken = free_vars(h);
  for (const auto& b : h.exists) taken.insert(b);
  for (const auto& b : h.exists) {
    if (avoid.count(b)) {
      Var fresh = b;
      do {
        fresh.name = "%r" + std::to_string(counter++) + "_" + b.name;
      } while (taken.count(fresh) || avoid.count(fresh));
      taken.insert(fresh);
      renaming.bind(b, Term::of(fresh));
      new_binders.push_back(fresh);
    } else {
      new_binders.push_back(b);
    }
  }
  SymbolicHeap r;
  r.exists = std::move(new_binders);
  if (renaming.empty()) {
    r.pure = (*this)(h.pure);
    r.spatial = (*this)(h.spatial);
  } else {
    r.pure = (*this)(renaming(h.pure));
    r.spatial = (*this)(renaming(h.spatial));
  }
  return r;
}

Subst Subst::compose(const Subst& outer, const Subst& inner) {
  Subst r;
  for (const auto& [v, t] : inner.map_) r.map_.emplace(v, outer(t));
  for (const auto& [v, t] : outer.map_)
    if (!r.contains(v)) r.map_.emplace(v, t);
  return r;
}

// ---------------------------------------------------------------------------
// Well-formedness

const char* wf_clause_name(WfClause c) {
  switch (c) {
    case WfClause::RootAtoms: return "root-atoms";
    case WfClause::Connectedness: return "connectedness";
    case WfClause::PredicateAtoms: return "predicate-atoms";
    case WfClause::BaseRuleShape: return "base-rule-shape";
    case WfClause::UnknownPredicate: return "unknown-predicate";
  }
  return "?";
}

WellformednessReport check_wellformed(const InductiveDef& def, const DefMap& env) {
  WellformednessReport report;
  for (size_t i = 0; i < def.rules.size(); ++i) {
    const Rule& rule = def.rules[i];
    auto violate = [&](WfClause c, const std::string& msg) {
      report.violations.push_back({i, c, msg});
    };
    if (rule.params.empty() || rule.params[0].sort != Sort::Loc) {
      violate(WfClause::RootAtoms, "first parameter must be a location");
      continue;
    }
    const Var source = rule.params[0];

    std::vector<SpatialAtom> cells;
    std::vector<PredAtom> preds;
    for (const auto& a : rule.spatial) {
      if (std::holds_alternative<PointsTo>(a))
        cells.push_back(a);
      else
        preds.push_back(std::get<PredAtom>(a));
    }
    for (const auto& pa : preds) {
      auto it = env.find(pa.pred);
      if (it == env.end()) {
        violate(WfClause::UnknownPredicate, "predicate " + pa.pred + " is not declared");
      } else if (it->second.params.size() != pa.args.size()) {
        violate(WfClause::UnknownPredicate,
                "predicate " + pa.pred + " applied to " + std::to_string(pa.args.size()) +
                    " arguments, expects " + std::to_string(it->second.params.size()));
      }
    }

    if (rule.kind() == RuleKind::BaseEmpty) continue;

    if (rule.kind() == RuleKind::BaseNonEmpty) {
      if (cells.size() != 1)
        violate(WfClause::BaseRuleShape, "spatial-nonempty base rule must be one cell");
      else if (std::get<PointsTo>(cells[0]).root != LocTerm::of(source))
        violate(WfClause::BaseRuleShape, "base-rule cell must be rooted at " + source.name);
      continue;
    }

    // Inductive rule.
    size_t roots_at_source = 0;
    for (const auto& a : cells)
      if (std::get<PointsTo>(a).root == LocTerm::of(source)) ++roots_at_source;
    if (roots_at_source != 1) {
      violate(WfClause::RootAtoms, "need exactly one cell rooted at " + source.name + ", found " +
                                       std::to_string(roots_at_source));
      continue;
    }
    GaifmanGraph g = gaifman_graph(cells);
    std::set<Var> cell_vars = free_vars(cells);
    for (const auto& z : rule.exists) {
      if (z.sort == Sort::Loc && !cell_vars.count(z))
        violate(WfClause::RootAtoms,
                "location existential " + z.name + " does not occur in the points-to part");
    }
    if (!g.connected_dag_rooted_at(LocTerm::of(source)))
      violate(WfClause::Connectedness,
              "points-to graph is not a connected DAG rooted at " + source.name);
    for (const auto& pa : preds) {
      if (pa.args.empty() || !pa.args[0].is_loc() || !pa.args[0].loc().is_var()) {
        violate(WfClause::PredicateAtoms, "predicate atom " + pa.pred + " has no variable root");
        continue;
      }
      LocTerm z = pa.args[0].loc();
      if (!g.vertices.count(z))
        violate(WfClause::PredicateAtoms,
                "root of " + pa.pred + " is not a vertex of the points-to graph");
      else if (g.has_outgoing(z))
        violate(WfClause::PredicateAtoms, "root of " + pa.pred + " is not a sink");
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Rendering

std::string show(const Var& v) { return v.name; }

std::string show(const LocTerm& t) { return t.is_nil() ? "nil" : t.var().name; }

std::string show(const DataTerm& t) {
  switch (t.kind()) {
    case DataTerm::Kind::VarRef: return t.var_ref().name;
    case DataTerm::Kind::IntLit: return std::to_string(t.value());
    case DataTerm::Kind::EmptySet: return "emptyset";
    case DataTerm::Kind::Neg: return "(- " + show(t.child0()) + ")";
    case DataTerm::Kind::Singleton: return "(set " + show(t.child0()) + ")";
    case DataTerm::Kind::Add: return "(+ " + show(t.child0()) + " " + show(t.child1()) + ")";
    case DataTerm::Kind::Union:
      return "(union " + show(t.child0()) + " " + show(t.child1()) + ")";
  }
  return "?";
}

std::string show(const Term& t) { return t.is_loc() ? show(t.loc()) : show(t.data()); }

std::string show(const DataAtom& a) {
  switch (a.kind) {
    case DataAtom::Kind::IntCmp:
      return "(" + std::string(cmp_op_name(a.op)) + " " + show(a.lhs) + " " + show(a.rhs) + ")";
    case DataAtom::Kind::Member: return "(in " + show(a.lhs) + " " + show(a.rhs) + ")";
    case DataAtom::Kind::MsetEq: return "(= " + show(a.lhs) + " " + show(a.rhs) + ")";
    case DataAtom::Kind::AllCmp:
      return std::string(a.op == CmpOp::Lt ? "(alllt " : "(allle ") + show(a.lhs) + " " +
             show(a.rhs) + ")";
  }
  return "?";
}

std::string show(const LocRel& r, bool eq) {
  return std::string(eq ? "(= " : "(distinct ") + show(r.lhs) + " " + show(r.rhs) + ")";
}

std::string show(const PureFormula& p) {
  std::string s;
  for (const auto& e : p.loc_eqs) s += (s.empty() ? "" : " ") + show(e, true);
  for (const auto& n : p.loc_neqs) s += (s.empty() ? "" : " ") + show(n, false);
  for (const auto& d : p.data_atoms) s += (s.empty() ? "" : " ") + show(d);
  return s;
}

std::string show(const SpatialAtom& a) {
  if (const auto* p = std::get_if<PointsTo>(&a)) {
    std::string s = "(pto " + show(p->root);
    for (const auto& [f, t] : p->cells) s += " (" + f + " " + show(t) + ")";
    return s + ")";
  }
  const auto& pa = std::get<PredAtom>(a);
  std::string s = "(pred " + pa.pred;
  for (const auto& t : pa.args) s += " " + show(t);
  return s + ")";
}

std::string show(const SymbolicHeap& h) {
  std::string s;
  if (!h.exists.empty()) {
    s += "(exists (";
    for (size_t i = 0; i < h.exists.size(); ++i) {
      if (i) s += " ";
      s += "(" + h.exists[i].name + " " + sort_name(h.exists[i].sort) + ")";
    }
    s += ")) ";
  }
  s += "(pure";
  std::string p = show(h.pure);
  if (!p.empty()) s += " " + p;
  s += ") (spatial";
  if (h.spatial.empty()) s += " emp";
  for (const auto& a : h.spatial) s += " " + show(a);
  s += ")";
  return s;
}

std::string show(const Subst& s) {
  std::string out = "{";
  bool first = true;
  for (const auto& [v, t] : s.entries()) {
    if (!first) out += ", ";
    first = false;
    out += v.name + " -> " + show(t);
  }
  return out + "}";
}

}  // namespace slent
