#pragma once

#include "slent/data_solver.hpp"
#include "slent/lemmas.hpp"
#include "slent/normalize.hpp"
#include "slent/oracle.hpp"
#include "slent/problem.hpp"

namespace slent {

struct ProverConfig {
  double timeout_seconds = 10.0;
  // hard cap on rule applications: factor * (|lhs atoms| + 2)^2 * (|lemmas| + 2)
  long long budget_factor = 64;
};

enum class StepRule { Match1, Match2, Lemma, Slice, UnsatLhs };

const char* step_rule_name(StepRule r);

struct TraceStep {
  StepRule rule;
  int depth = 0;
  LemmaFamily family = LemmaFamily::BaseRule;  // Lemma steps only
  std::string lemma_id;
  std::string target;                 // rendered RHS atom or judgement
  std::vector<std::string> consumed;  // rendered LHS atoms
  std::string eta;                    // witness fragment
};

struct ProofTrace {
  std::vector<TraceStep> steps;  // preorder of the successful derivation
  std::string to_string() const;
  std::vector<StepRule> rule_sequence() const;
};

struct LemmaCounters {
  long base = 0;        // #b
  long inductive = 0;   // #r
  long syntactic = 0;   // #p
  long composition = 0; // #c
  long derived = 0;     // #d
  long sum() const { return base + inductive + syntactic + composition + derived; }
};

LemmaCounters count_trace(const ProofTrace& t);

/// One right-hand side to establish; the left-hand side and its saturation
/// store live in the engine context. Sub mode carries no pure part.
struct Judgement {
  enum class Mode { Full, Sub };
  Mode mode = Mode::Full;
  std::vector<Var> rhs_exists;
  PureFormula rhs_pure;
  std::vector<SpatialAtom> rhs_spatial;
};

struct DisjunctProof {
  size_t lhs_index = 0;
  size_t rhs_index = 0;
  bool vacuous = false;  // contradictory left-hand side
  Subst witness;
  ProofTrace trace;
};

struct Verdict {
  enum class Kind { Valid, Invalid, Unknown };
  Kind kind = Kind::Unknown;
  std::vector<DisjunctProof> proofs;            // Valid
  std::optional<BoundedModel> countermodel;     // Invalid (via the oracle)
  std::string diagnosis;
  LemmaCounters counters;                       // summed over disjunct proofs
  long data_checks = 0;
};

const char* verdict_name(Verdict::Kind k);

/// Proves every left disjunct against some right disjunct with the Fig-style
/// strategy (syntactic match, then lemmas, then slicing), after saturating
/// the left-hand side. When the strategy fails and an oracle is supplied,
/// bounded refutation decides Invalid vs Unknown.
Verdict prove(const Problem& problem, const LemmaSet& lemmas, const DataSolver& solver,
              const Oracle* oracle = nullptr, const ProverConfig& config = {});

}  // namespace slent
