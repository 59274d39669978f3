#pragma once

#include <compare>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace slent {

struct SlentError : std::runtime_error {
  explicit SlentError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SortError : SlentError {
  explicit SortError(const std::string& msg) : SlentError(msg) {}
};

enum class Sort { Loc, Int, Mset };

const char* sort_name(Sort s);

/// A sorted variable. Identity is (name, sort).
struct Var {
  std::string name;
  Sort sort = Sort::Loc;

  friend auto operator<=>(const Var&, const Var&) = default;
};

/// A location-sorted term: a variable or the constant nil.
class LocTerm {
 public:
  LocTerm() = default;  // nil
  static LocTerm nil() { return LocTerm{}; }
  static LocTerm of(Var v);

  bool is_nil() const { return !var_.has_value(); }
  bool is_var() const { return var_.has_value(); }
  const Var& var() const;

  friend auto operator<=>(const LocTerm&, const LocTerm&) = default;

 private:
  std::optional<Var> var_;  // nullopt = nil
};

/// Immutable data-sorted term tree (integers and multisets of integers).
/// Nodes are shared; copying a DataTerm is cheap.
class DataTerm {
 public:
  enum class Kind { VarRef, IntLit, Add, Neg, EmptySet, Singleton, Union };

  DataTerm() : DataTerm(lit(0)) {}

  static DataTerm var(Var v);
  static DataTerm lit(long long n);
  static DataTerm add(DataTerm a, DataTerm b);
  static DataTerm neg(DataTerm a);
  static DataTerm empty_set();
  static DataTerm singleton(DataTerm elem);
  static DataTerm mset_union(DataTerm a, DataTerm b);

  Kind kind() const;
  Sort sort() const;  // Int or Mset
  const Var& var_ref() const;
  long long value() const;
  DataTerm child0() const;  // Add/Union lhs, Neg/Singleton operand
  DataTerm child1() const;  // Add/Union rhs

  bool operator==(const DataTerm& o) const { return compare(*this, o) == 0; }
  friend int compare(const DataTerm& a, const DataTerm& b);

 private:
  struct Node;
  explicit DataTerm(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

/// A term of any sort.
class Term {
 public:
  Term() : v_(LocTerm::nil()) {}
  Term(LocTerm l) : v_(std::move(l)) {}
  Term(DataTerm d) : v_(std::move(d)) {}
  static Term of(Var v);

  Sort sort() const;
  bool is_loc() const { return std::holds_alternative<LocTerm>(v_); }
  const LocTerm& loc() const { return std::get<LocTerm>(v_); }
  const DataTerm& data() const { return std::get<DataTerm>(v_); }
  /// The variable when this term is exactly a variable reference.
  std::optional<Var> as_var() const;

  bool operator==(const Term& o) const { return compare(*this, o) == 0; }
  friend int compare(const Term& a, const Term& b);

 private:
  std::variant<LocTerm, DataTerm> v_;
};

enum class CmpOp { Eq, Ne, Lt, Le };

const char* cmp_op_name(CmpOp op);

/// An atomic data constraint.
struct DataAtom {
  enum class Kind { IntCmp, Member, MsetEq, AllCmp };

  Kind kind = Kind::IntCmp;
  CmpOp op = CmpOp::Eq;  // IntCmp: all ops; AllCmp: Lt/Le only
  DataTerm lhs, rhs;

  static DataAtom int_cmp(CmpOp op, DataTerm a, DataTerm b);
  static DataAtom member(DataTerm elem, DataTerm mset);
  static DataAtom mset_eq(DataTerm a, DataTerm b);
  // Every element of a relates to every element of b; vacuous over empty sets.
  // At least one side must be multiset-sorted.
  static DataAtom all_cmp(CmpOp op, DataTerm a, DataTerm b);

  bool operator==(const DataAtom& o) const { return compare(*this, o) == 0; }
  friend int compare(const DataAtom& a, const DataAtom& b);
};

/// An (in)equality between location terms. Orientation is kept as written.
struct LocRel {
  LocTerm lhs, rhs;
  friend auto operator<=>(const LocRel&, const LocRel&) = default;
};

/// Conjunction of location (dis)equalities and data constraints.
struct PureFormula {
  std::vector<LocRel> loc_eqs;
  std::vector<LocRel> loc_neqs;
  std::vector<DataAtom> data_atoms;

  bool empty() const { return loc_eqs.empty() && loc_neqs.empty() && data_atoms.empty(); }
  void add_loc_eq(LocTerm a, LocTerm b);
  void add_loc_neq(LocTerm a, LocTerm b);
  void add_data(DataAtom a);
  void append(const PureFormula& other);
  void sort_canonical();

  bool operator==(const PureFormula& o) const { return compare(*this, o) == 0; }
  friend int compare(const PureFormula& a, const PureFormula& b);
};

/// One allocated cell: root and its field bindings.
/// Pointer fields hold location terms, data fields hold integer terms.
struct PointsTo {
  LocTerm root;
  std::map<std::string, Term> cells;
};

struct PredAtom {
  std::string pred;
  std::vector<Term> args;
};

using SpatialAtom = std::variant<PointsTo, PredAtom>;

int compare(const SpatialAtom& a, const SpatialAtom& b);
int compare(const PointsTo& a, const PointsTo& b);
int compare(const PredAtom& a, const PredAtom& b);
bool spatial_less(const SpatialAtom& a, const SpatialAtom& b);
inline bool operator==(const SpatialAtom& a, const SpatialAtom& b) { return compare(a, b) == 0; }

/// The root location of an atom (points-to root or first predicate argument).
LocTerm spatial_root(const SpatialAtom& a);

/// A possibly-quantified conjunction of a pure and a spatial part.
/// An empty spatial vector is the empty-heap assertion.
struct SymbolicHeap {
  std::vector<Var> exists;
  PureFormula pure;
  std::vector<SpatialAtom> spatial;

  bool operator==(const SymbolicHeap& o) const { return compare(*this, o) == 0; }
  friend int compare(const SymbolicHeap& a, const SymbolicHeap& b);
};

/// Top-level disjunction of symbolic heaps.
struct Formula {
  std::vector<SymbolicHeap> disjuncts;
};

enum class RuleKind { BaseEmpty, BaseNonEmpty, Inductive };

struct Rule {
  std::string head;
  std::vector<Var> params;
  std::vector<Var> exists;
  PureFormula pure;
  std::vector<SpatialAtom> spatial;

  RuleKind kind() const;
};

/// Parameter indices for the source/hole pairs; remaining indices are static.
struct RoleAssignment {
  int source_loc = -1;
  int source_data = -1;
  int hole_loc = -1;
  int hole_data = -1;
  std::vector<int> statics;

  friend auto operator<=>(const RoleAssignment&, const RoleAssignment&) = default;
};

struct InductiveDef {
  std::string name;
  std::vector<Var> params;
  std::optional<RoleAssignment> declared_roles;
  std::vector<Rule> rules;
};

using DefMap = std::map<std::string, InductiveDef>;

/// Directed graph of a points-to multiset: one vertex per location
/// variable or nil, one arc per location-valued field binding.
struct GaifmanGraph {
  std::set<LocTerm> vertices;
  std::set<std::pair<LocTerm, LocTerm>> arcs;

  bool has_outgoing(const LocTerm& v) const;
  /// Every vertex reachable from root and no directed cycle.
  bool connected_dag_rooted_at(const LocTerm& root) const;
};

GaifmanGraph gaifman_graph(const std::vector<SpatialAtom>& points_tos);

// ---------------------------------------------------------------------------
// Free variables

std::set<Var> free_vars(const DataTerm& t);
std::set<Var> free_vars(const Term& t);
std::set<Var> free_vars(const DataAtom& a);
std::set<Var> free_vars(const PureFormula& p);
std::set<Var> free_vars(const SpatialAtom& a);
std::set<Var> free_vars(const std::vector<SpatialAtom>& atoms);
std::set<Var> free_vars(const SymbolicHeap& h);

// ---------------------------------------------------------------------------
// Substitution

/// A finite sort-preserving mapping from variables to terms.
class Subst {
 public:
  Subst() = default;

  bool contains(const Var& v) const { return map_.count(v) != 0; }
  const Term* find(const Var& v) const;
  /// Binding a variable twice to different terms throws.
  void bind(const Var& v, Term t);
  void merge(const Subst& other);  // throws on conflicting bindings
  size_t size() const { return map_.size(); }
  bool empty() const { return map_.empty(); }
  const std::map<Var, Term>& entries() const { return map_; }

  LocTerm operator()(const LocTerm& t) const;
  DataTerm operator()(const DataTerm& t) const;
  Term operator()(const Term& t) const;
  DataAtom operator()(const DataAtom& a) const;
  PureFormula operator()(const PureFormula& p) const;
  SpatialAtom operator()(const SpatialAtom& a) const;
  std::vector<SpatialAtom> operator()(const std::vector<SpatialAtom>& v) const;
  /// Capture-avoiding: binders clashing with the range are renamed.
  SymbolicHeap operator()(const SymbolicHeap& h) const;

  /// Composition: apply(compose(s2, s1), x) == apply(s2, apply(s1, x)).
  static Subst compose(const Subst& outer, const Subst& inner);

 private:
  std::map<Var, Term> map_;
};

// ---------------------------------------------------------------------------
// Well-formedness

enum class WfClause {
  RootAtoms,        // split into points-to part + predicate part, unique root
                    // cell at the first parameter, location existentials in it
  Connectedness,    // points-to graph is a connected DAG rooted at the source
  PredicateAtoms,   // every predicate atom sits at a sink of the graph
  BaseRuleShape,    // a spatial-nonempty base rule is one root cell
  UnknownPredicate,
};

const char* wf_clause_name(WfClause c);

struct WfViolation {
  size_t rule_index;
  WfClause clause;
  std::string message;
};

struct WellformednessReport {
  std::vector<WfViolation> violations;
  bool ok() const { return violations.empty(); }
};

WellformednessReport check_wellformed(const InductiveDef& def, const DefMap& env);

// ---------------------------------------------------------------------------
// Rendering (canonical compact s-expressions, used for traces and sorting)

std::string show(const Var& v);
std::string show(const LocTerm& t);
std::string show(const DataTerm& t);
std::string show(const Term& t);
std::string show(const DataAtom& a);
std::string show(const LocRel& r, bool eq);
std::string show(const PureFormula& p);
std::string show(const SpatialAtom& a);
std::string show(const SymbolicHeap& h);
std::string show(const Subst& s);

}  // namespace slent
