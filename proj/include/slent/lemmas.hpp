#pragma once

#include "slent/ast.hpp"
#include "slent/data_solver.hpp"

namespace slent {

enum class LemmaFamily { BaseRule, InductiveRule, Composition, Completion, Stronger, Contraction };

const char* lemma_family_name(LemmaFamily f);

/// premise (exists Z. pure /\ root * rest) => conclusion.
/// The root is either one predicate atom or a points-to multiset rooted at
/// the conclusion's source argument (empty root = empty heap); it contains
/// every location variable of the existential prefix.
struct Lemma {
  std::string id;
  LemmaFamily family;
  std::vector<Var> premise_exists;
  PureFormula premise_pure;
  std::vector<SpatialAtom> premise_root;
  std::vector<SpatialAtom> premise_rest;
  PredAtom conclusion;
};

std::string print_lemma(const Lemma& l);

/// All lemmas, listed base rules first, then inductive rules, composition,
/// completion, stronger, contraction; deterministic within each family.
struct LemmaSet {
  std::vector<Lemma> lemmas;

  std::vector<const Lemma*> for_conclusion(const std::string& pred) const;
  size_t size() const { return lemmas.size(); }
};

// ---------------------------------------------------------------------------
// Role inference and syntactic compositionality

/// Every role assignment whose source/hole pairs match the unique
/// spatial-empty base rule `source_loc = hole_loc /\ source_data = hole_data`
/// exactly, with the source location being the rule-head root parameter.
/// A data-equality orientation ambiguity is resolved against the inductive
/// rules (the hole-data parameter must stay out of them except as the
/// recursive atom's hole argument).
std::vector<RoleAssignment> infer_roles(const InductiveDef& def);

struct CompViolation {
  size_t rule_index;  // def.rules index, or size_t(-1) for def-level issues
  std::string clause;
  std::string message;
};

struct CompReport {
  bool ok = false;
  std::optional<RoleAssignment> roles;
  std::vector<CompViolation> violations;
};

/// Checks the shape criteria for the composition property under the given
/// roles: one empty base rule equating source to hole, at least one
/// inductive rule, exactly one recursive atom carrying the hole/static
/// parameters verbatim with existential source arguments, and hole
/// parameters occurring nowhere else.
CompReport is_syntactically_compositional(const InductiveDef& def, const RoleAssignment& roles);

/// Declared roles win when present; otherwise every inferred assignment is
/// tried. Returns the first succeeding report, or the report of the first
/// candidate (base-rule-shape failure when no candidate exists).
CompReport classify_compositional(const InductiveDef& def);

// ---------------------------------------------------------------------------
// Lemma construction

Lemma make_composition_lemma(const InductiveDef& def, const RoleAssignment& roles);

std::vector<Lemma> rules_as_lemmas(const InductiveDef& def);

struct CompletionResult {
  LocTerm c_loc;
  DataTerm c_data;
  std::vector<Lemma> lemmas;  // intro, elim, composition
};

/// P' is P with the hole pair replaced by constants: the base rule pins the
/// source pair to ground constants and each inductive rule of P' is the
/// corresponding rule of P with the recursive atom's hole arguments dropped.
std::optional<CompletionResult> detect_completion(const InductiveDef& p,
                                                  const RoleAssignment& roles,
                                                  const InductiveDef& p_prime);

/// P' is stronger: identical base rules and spatial parts, rule-wise pure
/// implication discharged by the data solver (location constraints encoded
/// over fresh integer symbols).
std::optional<std::vector<Lemma>> detect_stronger(const InductiveDef& p_strong,
                                                  const RoleAssignment& roles_strong,
                                                  const InductiveDef& p_weak,
                                                  const RoleAssignment& roles_weak,
                                                  const DataSolver& solver);

struct ContractionResult {
  std::map<int, int> contraction;  // static param index of P -> hole index (or itself)
  std::vector<Lemma> lemmas;       // intro, elim, composition
};

/// P' arises from P by identifying some static parameters with the
/// sort-matching hole parameter.
std::optional<ContractionResult> detect_contraction(const InductiveDef& p,
                                                    const RoleAssignment& roles,
                                                    const InductiveDef& p_prime);

/// Union of rule lemmas over all definitions plus every pairwise detection;
/// duplicates removed by canonical equality. Deterministic order.
LemmaSet generate_all_lemmas(const DefMap& defs, const DataSolver& solver);

/// Canonical rendering of a rule body, invariant under alpha-renaming of the
/// existential prefix (parameters must already carry canonical names).
std::string canonical_rule_key(const std::vector<Var>& exists, const PureFormula& pure,
                               const std::vector<SpatialAtom>& spatial);

}  // namespace slent
