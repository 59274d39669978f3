#pragma once

#include <optional>

#include "slent/ast.hpp"

namespace slent {

/// Total assignment of concrete values to the variables of a data query.
struct GroundEnv {
  std::map<Var, long long> ints;
  std::map<Var, std::vector<long long>> msets;  // kept sorted
};

long long eval_int(const GroundEnv& env, const DataTerm& t);
std::vector<long long> eval_mset(const GroundEnv& env, const DataTerm& t);
bool eval_ground(const GroundEnv& env, const DataAtom& atom);

enum class EntailResult { Entailed, NotEntailed, Unknown };

struct DataQuery {
  std::vector<DataAtom> hypotheses;
  std::vector<DataAtom> goal;  // conjunction
};

struct EncodedQuery {
  std::string script;
  std::map<Var, std::string> symbols;
};

/// Deterministic QF_UFLIA rendering of a structurally normalized query as an
/// unsatisfiability check of hypotheses plus negated goal. Multisets are
/// abstracted by an emptiness flag, min/max bounds and a membership
/// predicate; multiset-equality goals are outside the abstraction and are
/// never encoded.
EncodedQuery encode_smtlib(const DataQuery& q, int round);

/// Witnesses for existential goal variables, plus pending variable-variable
/// links that could not be grounded yet.
struct ExistsResult {
  bool ok = false;
  Subst witness;
  std::vector<std::pair<Var, Var>> aliases;
};

/// Decides entailments between data constraints. A structural layer
/// (multiset flattening, distribution rules, difference-bound closure over
/// the integer atoms) runs first; residual goals go to an optional external
/// SMT-LIB process. "sat" from the backend is downgraded to Unknown unless a
/// bounded ground-witness search confirms non-entailment.
class DataSolver {
 public:
  DataSolver() = default;

  void set_backend(std::string command, int timeout_ms = 5000);
  bool has_backend() const { return !backend_cmd_.empty(); }

  EntailResult entails(const DataQuery& q) const;

  /// Hypotheses entail the goal for SOME assignment of the existential
  /// variables; the assignment found is returned. Only syntactic-unification
  /// witnesses are considered.
  ExistsResult entails_exists(const std::vector<DataAtom>& hyps,
                              const std::vector<DataAtom>& goal,
                              const std::set<Var>& exvars) const;

  /// Number of entailment checks issued so far (both entry points).
  long query_count() const { return queries_; }
  void reset_counters() const { queries_ = 0; }

 private:
  std::string backend_cmd_;
  int backend_timeout_ms_ = 5000;
  mutable long queries_ = 0;
  mutable int round_ = 0;
};

/// Runs `command` as a child process, feeds it the script on stdin and
/// returns the last sat/unsat/unknown token of its stdout. Empty string on
/// spawn failure or timeout.
std::string run_smt_process(const std::string& command, const std::string& script,
                            int timeout_ms);

/// Bounded search for a ground environment satisfying all hypotheses and
/// violating some goal atom. Integers range over {-2..3}, multisets over
/// {-1..2} with at most two elements.
std::optional<GroundEnv> find_ground_witness(const DataQuery& q, long budget = 200000);

}  // namespace slent
