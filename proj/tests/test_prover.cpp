#include <doctest.h>

#include "helpers.hpp"
#include "slent/prover.hpp"

using namespace slent;
using namespace slent::test;

namespace {

Verdict prove_fixture(const std::string& rel, bool with_oracle = false,
                      const Bounds& bounds = Bounds{}) {
  Problem p = load_fixture(rel);
  DataSolver solver;
  LemmaSet lemmas = generate_all_lemmas(p.defs, solver);
  if (with_oracle) {
    Oracle oracle(p.defs, bounds);
    return prove(p, lemmas, solver, &oracle);
  }
  return prove(p, lemmas, solver);
}

}  // namespace

TEST_CASE("the two-cell example is valid with the documented derivation") {
  Problem p = load_fixture("appd.slent");
  DataSolver solver;
  LemmaSet lemmas = generate_all_lemmas(p.defs, solver);
  Verdict v = prove(p, lemmas, solver);
  REQUIRE(v.kind == Verdict::Kind::Valid);
  REQUIRE(v.proofs.size() == 1);
  const DisjunctProof& proof = v.proofs[0];

  // witness: M -> {v1} u {v2} u emptyset
  REQUIRE(proof.witness.contains(mv("M")));
  DataTerm expected = DataTerm::mset_union(
      DataTerm::mset_union(DataTerm::singleton(DataTerm::var(iv("v1"))),
                           DataTerm::singleton(DataTerm::var(iv("v2")))),
      DataTerm::empty_set());
  GroundEnv env;
  env.ints[iv("v1")] = 4;
  env.ints[iv("v2")] = 7;
  const Term& got = *proof.witness.find(mv("M"));
  REQUIRE(!got.is_loc());
  CHECK(eval_mset(env, got.data()) == eval_mset(env, expected));

  // rule sequence pinned to the walkthrough
  std::vector<StepRule> seq = proof.trace.rule_sequence();
  std::vector<StepRule> want = {StepRule::Slice, StepRule::Lemma,  StepRule::Match1,
                                StepRule::Slice, StepRule::Lemma,  StepRule::Match1,
                                StepRule::Slice, StepRule::Lemma};
  CHECK(seq == want);
  // the three lemma steps: inductive, inductive, base
  std::vector<LemmaFamily> fams;
  for (const auto& s : proof.trace.steps)
    if (s.rule == StepRule::Lemma) fams.push_back(s.family);
  CHECK(fams == std::vector<LemmaFamily>{LemmaFamily::InductiveRule, LemmaFamily::InductiveRule,
                                         LemmaFamily::BaseRule});

  LemmaCounters c = count_trace(proof.trace);
  CHECK(c.inductive == 2);
  CHECK(c.base == 1);
  CHECK(c.syntactic == 0);
  CHECK(c.composition == 0);
}

TEST_CASE("the tree-walk step applies the composition lemma exactly once") {
  Verdict v = prove_fixture("rdbi/bsts_step_left.slent");
  REQUIRE(v.kind == Verdict::Kind::Valid);
  CHECK(v.counters.composition == 1);
  CHECK(v.counters.inductive >= 1);
  CHECK(v.counters.base >= 1);
}

TEST_CASE("whole-query verdicts over the corpus") {
  SUBCASE("sorted list search") {
    for (const char* f : {"rdbi/sls_init.slent", "rdbi/sls_step.slent",
                          "rdbi/sls_exit_found.slent", "rdbi/sls_exit_nil.slent"}) {
      CAPTURE(f);
      CHECK(prove_fixture(f).kind == Verdict::Kind::Valid);
    }
  }
  SUBCASE("sorted list insert") {
    for (const char* f : {"rdbi/sli_init.slent", "rdbi/sli_step.slent", "rdbi/sli_empty.slent",
                          "rdbi/sli_front.slent", "rdbi/sli_front_empty.slent",
                          "rdbi/sli_mid.slent", "rdbi/sli_end.slent", "rdbi/sli_exit.slent"}) {
      CAPTURE(f);
      CHECK(prove_fixture(f).kind == Verdict::Kind::Valid);
    }
  }
  SUBCASE("sorted list delete") {
    for (const char* f : {"rdbi/sld_head.slent", "rdbi/sld_mid.slent", "rdbi/sld_exit.slent",
                          "rdbi/sld_notfound.slent"}) {
      CAPTURE(f);
      CHECK(prove_fixture(f).kind == Verdict::Kind::Valid);
    }
  }
  SUBCASE("tree search") {
    for (const char* f : {"rdbi/bsts_init.slent", "rdbi/bsts_step_left.slent",
                          "rdbi/bsts_step_right.slent", "rdbi/bsts_exit.slent"}) {
      CAPTURE(f);
      CHECK(prove_fixture(f).kind == Verdict::Kind::Valid);
    }
  }
  SUBCASE("nested lists and skip lists") {
    for (const char* f : {"shape/nll_init.slent", "shape/nll_step.slent", "shape/nll_exit.slent",
                          "shape/nll_singleton.slent", "shape/skl_init.slent",
                          "shape/skl_step.slent", "shape/skl_exit.slent",
                          "shape/skl_singleton.slent"}) {
      CAPTURE(f);
      CHECK(prove_fixture(f).kind == Verdict::Kind::Valid);
    }
  }
}

TEST_CASE("exit verdict uses the completion lemma") {
  Verdict v = prove_fixture("rdbi/bsts_exit.slent");
  REQUIRE(v.kind == Verdict::Kind::Valid);
  CHECK(v.counters.derived == 1);
}

TEST_CASE("a contradictory left side is vacuously valid") {
  Verdict v = prove_fixture("unsat_lhs.slent");
  REQUIRE(v.kind == Verdict::Kind::Valid);
  CHECK(v.diagnosis == "unsat-lhs");
  REQUIRE(v.proofs.size() == 1);
  CHECK(v.proofs[0].vacuous);
  REQUIRE(v.proofs[0].trace.steps.size() == 1);
  CHECK(v.proofs[0].trace.steps[0].rule == StepRule::UnsatLhs);
}

TEST_CASE("an invalid entailment is refuted through the oracle") {
  Bounds b;
  b.max_cells = 1;
  Verdict v = prove_fixture("invalid_lseg_bst.slent", true, b);
  REQUIRE(v.kind == Verdict::Kind::Invalid);
  REQUIRE(v.countermodel.has_value());
  CHECK(v.countermodel->heap.size() == 1);
}

TEST_CASE("without an oracle the strategy reports unknown") {
  Verdict v = prove_fixture("invalid_lseg_bst.slent", false);
  CHECK(v.kind == Verdict::Kind::Unknown);
  CHECK(!v.diagnosis.empty());
}

TEST_CASE("witness totality survives an independent audit") {
  for (const char* f : {"appd.slent", "rdbi/sls_step.slent", "rdbi/bsts_exit.slent"}) {
    CAPTURE(f);
    Problem p = load_fixture(f);
    DataSolver solver;
    LemmaSet lemmas = generate_all_lemmas(p.defs, solver);
    Verdict v = prove(p, lemmas, solver);
    REQUIRE(v.kind == Verdict::Kind::Valid);
    for (const auto& proof : v.proofs) {
      if (proof.vacuous) continue;
      const SymbolicHeap& rhs = p.query->rhs.disjuncts[proof.rhs_index];
      for (const auto& binder : rhs.exists) CHECK(proof.witness.contains(binder));
      // substituted pure part follows from the left-hand side alone
      PureFormula instantiated = proof.witness(rhs.pure);
      DataQuery audit{p.query->lhs.disjuncts[proof.lhs_index].pure.data_atoms,
                      instantiated.data_atoms};
      if (!audit.goal.empty()) CHECK(solver.entails(audit) == EntailResult::Entailed);
    }
  }
}

TEST_CASE("lemma steps consume disjoint atoms and shrink the pool") {
  Problem p = load_fixture("rdbi/bsts_step_left.slent");
  DataSolver solver;
  LemmaSet lemmas = generate_all_lemmas(p.defs, solver);
  Verdict v = prove(p, lemmas, solver);
  REQUIRE(v.kind == Verdict::Kind::Valid);
  const auto& steps = v.proofs[0].trace.steps;
  // atoms consumed by sibling steps never repeat
  std::multiset<std::string> consumed;
  for (const auto& s : steps)
    for (const auto& a : s.consumed)
      if (s.rule == StepRule::Match1 || s.rule == StepRule::Match2) consumed.insert(a);
  std::set<std::string> unique_consumed(consumed.begin(), consumed.end());
  CHECK(consumed.size() == unique_consumed.size());
  // every lemma application consumes at least one atom at or below it,
  // except base-rule closures of empty segments
  for (size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].rule != StepRule::Lemma) continue;
    if (steps[i].family == LemmaFamily::BaseRule) continue;
    bool consumes = false;
    for (size_t j = i + 1; j < steps.size() && steps[j].depth > steps[i].depth; ++j)
      if (!steps[j].consumed.empty()) consumes = true;
    CHECK(consumes);
  }
}

TEST_CASE("identical runs yield identical traces") {
  for (int i = 0; i < 2; ++i) {
    Verdict a = prove_fixture("rdbi/bsts_step_left.slent");
    Verdict b = prove_fixture("rdbi/bsts_step_left.slent");
    REQUIRE(a.kind == Verdict::Kind::Valid);
    CHECK(a.proofs[0].trace.to_string() == b.proofs[0].trace.to_string());
  }
}

TEST_CASE("data entailment counts are reported") {
  Verdict v = prove_fixture("appd.slent");
  REQUIRE(v.kind == Verdict::Kind::Valid);
  CHECK(v.data_checks > 0);
  LemmaCounters c = v.counters;
  // counters reconstruct from the trace
  LemmaCounters from_trace = count_trace(v.proofs[0].trace);
  CHECK(c.sum() == from_trace.sum());
}
