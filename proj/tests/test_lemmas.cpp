#include <doctest.h>

#include "helpers.hpp"
#include "slent/lemmas.hpp"

using namespace slent;
using namespace slent::test;

namespace {

bool has_clause(const CompReport& r, const std::string& clause) {
  for (const auto& v : r.violations)
    if (v.clause == clause) return true;
  return false;
}

}  // namespace

TEST_CASE("role inference") {
  SUBCASE("ported list segment has exactly one assignment") {
    Problem p = load_fixture("defs/lseg.slent");
    auto roles = infer_roles(p.defs.at("lseg"));
    REQUIRE(roles.size() == 1);
    CHECK(roles[0].source_loc == 0);
    CHECK(roles[0].source_data == 1);
    CHECK(roles[0].hole_loc == 2);
    CHECK(roles[0].hole_data == 3);
    CHECK(roles[0].statics.empty());
  }

  SUBCASE("closed list segment has none") {
    Problem p = load_fixture("defs/lseg3.slent");
    CHECK(infer_roles(p.defs.at("lseg3")).empty());
  }

  SUBCASE("whole trees have none") {
    Problem p = load_fixture("defs/bst.slent");
    CHECK(infer_roles(p.defs.at("bst")).empty());
  }

  SUBCASE("the static parameter is recognized") {
    Problem p = load_fixture("defs/tail_variants.slent");
    auto roles = infer_roles(p.defs.at("stabsth"));
    REQUIRE(roles.size() == 1);
    CHECK(roles[0].statics == std::vector<int>{4});
  }
}

TEST_CASE("syntactic compositionality") {
  SUBCASE("bsthole is compositional") {
    Problem p = load_fixture("defs/bst.slent");
    CompReport r = classify_compositional(p.defs.at("bsthole"));
    CHECK(r.ok);
  }

  SUBCASE("lseg is compositional") {
    Problem p = load_fixture("defs/lseg.slent");
    CHECK(classify_compositional(p.defs.at("lseg")).ok);
  }

  SUBCASE("lseg3 fails on the base rule") {
    Problem p = load_fixture("defs/lseg3.slent");
    CompReport r = classify_compositional(p.defs.at("lseg3"));
    CHECK(!r.ok);
    CHECK(has_clause(r, "base-rule-shape"));
  }

  SUBCASE("a hole disequality breaks compositionality") {
    Problem p = load_fixture("defs/neqbsthole.slent");
    CompReport r = classify_compositional(p.defs.at("neqbsthole"));
    CHECK(!r.ok);
    CHECK(has_clause(r, "hole-in-pure"));
  }

  SUBCASE("a tail pointer at the hole breaks compositionality") {
    Problem p = load_fixture("defs/tail_variants.slent");
    CompReport r = classify_compositional(p.defs.at("tailbsth"));
    CHECK(!r.ok);
    CHECK(has_clause(r, "hole-in-root"));
  }

  SUBCASE("stabsth is compositional") {
    Problem p = load_fixture("defs/tail_variants.slent");
    CHECK(classify_compositional(p.defs.at("stabsth")).ok);
  }

  SUBCASE("declared roles win and are validated") {
    Problem p = load_fixture("defs/lseg.slent");
    InductiveDef def = p.defs.at("lseg");
    auto inferred = infer_roles(def);
    def.declared_roles = inferred[0];
    CHECK(classify_compositional(def).ok);
    RoleAssignment wrong = inferred[0];
    std::swap(wrong.source_data, wrong.hole_data);
    def.declared_roles = wrong;
    CHECK(!classify_compositional(def).ok);
  }

  SUBCASE("inference includes declared roles") {
    Problem p = load_fixture("defs/tail_variants.slent");
    InductiveDef def = p.defs.at("stabsth");
    auto inferred = infer_roles(def);
    RoleAssignment declared;
    declared.source_loc = 0;
    declared.source_data = 1;
    declared.hole_loc = 2;
    declared.hole_data = 3;
    declared.statics = {4};
    CHECK(std::find(inferred.begin(), inferred.end(), declared) != inferred.end());
  }
}

TEST_CASE("rules as lemmas") {
  Problem p = load_fixture("defs/bst.slent");
  auto ls = rules_as_lemmas(p.defs.at("bst"));
  REQUIRE(ls.size() == 2);
  CHECK(ls[0].family == LemmaFamily::BaseRule);
  CHECK(ls[0].premise_root.empty());
  CHECK(ls[1].family == LemmaFamily::InductiveRule);
  REQUIRE(ls[1].premise_root.size() == 1);
  CHECK(std::holds_alternative<PointsTo>(ls[1].premise_root[0]));
  CHECK(ls[1].premise_rest.size() == 2);
  CHECK(ls[1].conclusion.pred == "bst");
}

TEST_CASE("composition lemma shape") {
  Problem p = load_fixture("defs/bst.slent");
  const auto& def = p.defs.at("bsthole");
  CompReport r = classify_compositional(def);
  REQUIRE(r.ok);
  Lemma l = make_composition_lemma(def, *r.roles);
  CHECK(l.family == LemmaFamily::Composition);
  CHECK(l.premise_exists.size() == 2);
  REQUIRE(l.premise_root.size() == 1);
  REQUIRE(l.premise_rest.size() == 1);
  const auto& a1 = std::get<PredAtom>(l.premise_root[0]);
  const auto& a2 = std::get<PredAtom>(l.premise_rest[0]);
  CHECK(a1.pred == "bsthole");
  CHECK(a2.pred == "bsthole");
  CHECK(a1.args[2] == a2.args[0]);
  CHECK(a1.args[3] == a2.args[1]);
  CHECK(a1.args[0] == l.conclusion.args[0]);
  CHECK(a1.args[1] == l.conclusion.args[1]);
  CHECK(a2.args[2] == l.conclusion.args[2]);
  CHECK(a2.args[3] == l.conclusion.args[3]);
}

TEST_CASE("completion detection") {
  Problem p = load_fixture("defs/bst.slent");
  const auto& bsthole = p.defs.at("bsthole");
  const auto& bst = p.defs.at("bst");
  CompReport r = classify_compositional(bsthole);
  REQUIRE(r.ok);

  SUBCASE("bst completes bsthole at (nil, emptyset)") {
    auto c = detect_completion(bsthole, *r.roles, bst);
    REQUIRE(c.has_value());
    CHECK(c->c_loc.is_nil());
    CHECK(c->c_data == DataTerm::empty_set());
    REQUIRE(c->lemmas.size() == 3);
    CHECK(c->lemmas[0].conclusion.pred == "bsthole");
    CHECK(c->lemmas[1].conclusion.pred == "bst");
    CHECK(c->lemmas[2].conclusion.pred == "bst");
    CHECK(c->lemmas[2].premise_exists.size() == 2);
  }

  SUBCASE("mismatched rule shapes yield nothing") {
    Problem q = load_fixture("defs/lseg.slent");
    const auto& lseg = q.defs.at("lseg");
    CompReport rl = classify_compositional(lseg);
    REQUIRE(rl.ok);
    CHECK(!detect_completion(lseg, *rl.roles, bst).has_value());
  }

  SUBCASE("a custom completion at a different constant") {
    std::string text = R"(
(declare-field next Loc)
(declare-field data Int)
(define-pred lseg ((E Loc) (M Mset) (F Loc) (M2 Mset))
  (rule (exists ()) (pure (= E F) (= M M2)) (spatial emp))
  (rule (exists ((X Loc) (v Int) (M1 Mset)))
    (pure (allle v M1) (= M (union (set v) M1)))
    (spatial (pto E (next X) (data v)) (pred lseg X M1 F M2))))
(define-pred lone ((E Loc) (M Mset))
  (rule (exists ()) (pure (= E nil) (= M (set 1))) (spatial emp))
  (rule (exists ((X Loc) (v Int) (M1 Mset)))
    (pure (allle v M1) (= M (union (set v) M1)))
    (spatial (pto E (next X) (data v)) (pred lone X M1))))
)";
    Problem q = parse_problem(text);
    const auto& lseg = q.defs.at("lseg");
    CompReport rl = classify_compositional(lseg);
    REQUIRE(rl.ok);
    auto c = detect_completion(lseg, *rl.roles, q.defs.at("lone"));
    REQUIRE(c.has_value());
    CHECK(c->c_loc.is_nil());
    CHECK(c->c_data == DataTerm::singleton(DataTerm::lit(1)));
  }
}

TEST_CASE("stronger detection") {
  Problem p = load_fixture("defs/bst_variants.slent");
  const auto& natbsth = p.defs.at("natbsth");
  const auto& bsthole = p.defs.at("bsthole");
  CompReport rn = classify_compositional(natbsth);
  CompReport rb = classify_compositional(bsthole);
  REQUIRE(rn.ok);
  REQUIRE(rb.ok);
  DataSolver solver;

  SUBCASE("the nonnegative variant is stronger") {
    auto s = detect_stronger(natbsth, *rn.roles, bsthole, *rb.roles, solver);
    REQUIRE(s.has_value());
    REQUIRE(s->size() == 2);
    CHECK((*s)[0].premise_root.size() == 1);
    CHECK(std::get<PredAtom>((*s)[0].premise_root[0]).pred == "natbsth");
    CHECK((*s)[0].conclusion.pred == "bsthole");
    CHECK((*s)[1].premise_exists.size() == 2);
  }

  SUBCASE("reflexivity") {
    auto s = detect_stronger(bsthole, *rb.roles, bsthole, *rb.roles, solver);
    CHECK(s.has_value());
  }

  SUBCASE("the reverse direction fails") {
    auto s = detect_stronger(bsthole, *rb.roles, natbsth, *rn.roles, solver);
    CHECK(!s.has_value());
  }
}

TEST_CASE("contraction detection") {
  Problem p = load_fixture("defs/tail_variants.slent");
  const auto& stabsth = p.defs.at("stabsth");
  const auto& tailbsth = p.defs.at("tailbsth");
  CompReport r = classify_compositional(stabsth);
  REQUIRE(r.ok);

  SUBCASE("the tail static contracts onto the hole") {
    auto c = detect_contraction(stabsth, *r.roles, tailbsth);
    REQUIRE(c.has_value());
    REQUIRE(c->contraction.count(4));
    CHECK(c->contraction.at(4) == 2);
    REQUIRE(c->lemmas.size() == 3);
    const auto& lr = c->lemmas[0];
    CHECK(lr.conclusion.pred == "stabsth");
    CHECK(lr.conclusion.args[4] == lr.conclusion.args[2]);
    const auto& comp = c->lemmas[2];
    const auto& first = std::get<PredAtom>(comp.premise_root[0]);
    CHECK(first.pred == "stabsth");
    CHECK(first.args[4] == comp.conclusion.args[2]);
    CHECK(comp.conclusion.pred == "tailbsth");
  }

  SUBCASE("identity contraction relates a predicate to itself") {
    auto c = detect_contraction(stabsth, *r.roles, stabsth);
    REQUIRE(c.has_value());
    CHECK(c->contraction.at(4) == 4);
  }

  SUBCASE("sort mismatches are rejected") {
    Problem q = load_fixture("defs/bst_variants.slent");
    const auto& bsthole = q.defs.at("bsthole");
    CompReport rb = classify_compositional(bsthole);
    REQUIRE(rb.ok);
    CHECK(!detect_contraction(bsthole, *rb.roles, q.defs.at("bst")).has_value());
  }
}

TEST_CASE("lemma set assembly") {
  DataSolver solver;

  SUBCASE("a lone ported segment yields base, inductive, composition") {
    Problem p = load_fixture("defs/lseg.slent");
    LemmaSet ls = generate_all_lemmas(p.defs, solver);
    REQUIRE(ls.size() == 3);
    CHECK(ls.lemmas[0].family == LemmaFamily::BaseRule);
    CHECK(ls.lemmas[1].family == LemmaFamily::InductiveRule);
    CHECK(ls.lemmas[2].family == LemmaFamily::Composition);
  }

  SUBCASE("trees with holes yield the full derived family") {
    Problem p = load_fixture("defs/bst.slent");
    LemmaSet ls = generate_all_lemmas(p.defs, solver);
    CHECK(ls.size() == 9);
    int base = 0, ind = 0, comp = 0, compl_ = 0;
    for (const auto& l : ls.lemmas) {
      if (l.family == LemmaFamily::BaseRule) ++base;
      if (l.family == LemmaFamily::InductiveRule) ++ind;
      if (l.family == LemmaFamily::Composition) ++comp;
      if (l.family == LemmaFamily::Completion) ++compl_;
    }
    CHECK(base == 2);
    CHECK(ind == 3);
    CHECK(comp == 1);
    CHECK(compl_ == 3);
  }

  SUBCASE("empty definitions yield an empty set") {
    DefMap none;
    CHECK(generate_all_lemmas(none, solver).size() == 0);
  }

  SUBCASE("assembly is deterministic") {
    Problem p1 = load_fixture("defs/bst_variants.slent");
    LemmaSet l1 = generate_all_lemmas(p1.defs, solver);
    Problem p2 = load_fixture("defs/bst_variants.slent");
    LemmaSet l2 = generate_all_lemmas(p2.defs, solver);
    REQUIRE(l1.size() == l2.size());
    for (size_t i = 0; i < l1.size(); ++i)
      CHECK(print_lemma(l1.lemmas[i]) == print_lemma(l2.lemmas[i]));
  }
}

TEST_CASE("canonical rule keys are congruent under renaming") {
  Problem p = load_fixture("defs/bst.slent");
  const Rule& rule = p.defs.at("bsthole").rules[1];
  std::string k1 = canonical_rule_key(rule.exists, rule.pure, rule.spatial);
  Subst ren;
  ren.bind(loc("X"), Term::of(loc("A")));
  ren.bind(loc("Y"), Term::of(loc("B")));
  ren.bind(mv("M3"), Term::of(mv("N3")));
  std::vector<Var> ex2 = {mv("M4"), loc("A"), iv("v"), loc("B"), mv("N3")};
  std::string k2 = canonical_rule_key(ex2, ren(rule.pure), ren(rule.spatial));
  CHECK(k1 == k2);
}

TEST_CASE("lemma goldens match the synthesized set") {
  DataSolver solver;
  auto check_golden = [&](const char* def_file, const char* golden_file) {
    Problem p = load_fixture(def_file);
    LemmaSet ls = generate_all_lemmas(p.defs, solver);
    std::string got;
    for (const auto& l : ls.lemmas) got += print_lemma(l) + "\n";
    CAPTURE(def_file);
    CHECK(got == read_file(std::string(SLENT_TEST_DIR) + "/golden/" + golden_file));
  };
  check_golden("defs/lseg.slent", "lemmas_lseg.txt");
  check_golden("defs/bst.slent", "lemmas_bst.txt");
  check_golden("defs/bst_variants.slent", "lemmas_bst_variants.txt");
  check_golden("defs/tail_variants.slent", "lemmas_tail_variants.txt");
}
