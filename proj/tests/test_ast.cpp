#include <doctest.h>

#include "helpers.hpp"
#include "slent/ast.hpp"

using namespace slent;
using namespace slent::test;

TEST_CASE("sorts are enforced at construction") {
  CHECK_THROWS_AS(DataTerm::var(loc("x")), SortError);
  CHECK_THROWS_AS(DataTerm::add(DataTerm::lit(1), DataTerm::empty_set()), SortError);
  CHECK_THROWS_AS(DataTerm::singleton(DataTerm::empty_set()), SortError);
  CHECK_THROWS_AS(DataAtom::member(DataTerm::lit(1), DataTerm::lit(2)), SortError);
  CHECK_THROWS_AS(DataAtom::all_cmp(CmpOp::Le, DataTerm::lit(1), DataTerm::lit(2)), SortError);
  CHECK_NOTHROW(DataAtom::all_cmp(CmpOp::Le, DataTerm::lit(1), DataTerm::var(mv("M"))));
}

TEST_CASE("free variables") {
  // exists M. lseg(x1, M, nil, emptyset) /\ v2 in M  has free {x1, v2}
  SymbolicHeap h;
  Var M = mv("M");
  h.exists = {M};
  PredAtom a{"lseg", {Term::of(loc("x1")), Term::of(M), Term(LocTerm::nil()),
                      Term(DataTerm::empty_set())}};
  h.spatial.push_back(a);
  h.pure.add_data(DataAtom::member(DataTerm::var(iv("v2")), DataTerm::var(M)));
  auto fv = free_vars(h);
  CHECK(fv == std::set<Var>{loc("x1"), iv("v2")});

  SymbolicHeap emp_heap;
  CHECK(free_vars(emp_heap).empty());

  DataTerm t = DataTerm::mset_union(DataTerm::singleton(DataTerm::var(iv("v"))),
                                    DataTerm::var(mv("M1")));
  CHECK(free_vars(t) == std::set<Var>{iv("v"), mv("M1")});
}

TEST_CASE("substitution application and composition") {
  Var X = loc("X"), v = iv("v");
  PointsTo cell;
  cell.root = LocTerm::of(loc("x1"));
  cell.cells.emplace("next", Term::of(X));
  cell.cells.emplace("data", Term::of(v));

  Subst eta;
  eta.bind(X, Term::of(loc("x2")));
  eta.bind(v, Term::of(iv("v1")));
  SpatialAtom out = eta(SpatialAtom(cell));
  const auto& p = std::get<PointsTo>(out);
  CHECK(p.cells.at("next") == Term::of(loc("x2")));
  CHECK(p.cells.at("data") == Term::of(iv("v1")));

  Subst identity;
  CHECK(identity(SpatialAtom(cell)) == SpatialAtom(cell));

  // composition law on a sampled term
  Subst s1, s2;
  s1.bind(iv("a"), Term(DataTerm::add(DataTerm::var(iv("b")), DataTerm::lit(5))));
  s2.bind(iv("b"), Term(DataTerm::lit(2)));
  DataTerm t = DataTerm::add(DataTerm::var(iv("a")), DataTerm::var(iv("b")));
  Subst composed = Subst::compose(s2, s1);
  CHECK(compare(s2(s1(t)), composed(t)) == 0);

  Subst bad;
  CHECK_THROWS_AS(bad.bind(loc("x"), Term(DataTerm::lit(1))), SortError);
}

TEST_CASE("capture-avoiding substitution on quantified heaps") {
  SymbolicHeap h;
  Var X = loc("X");
  h.exists = {X};
  h.pure.add_loc_eq(LocTerm::of(loc("y")), LocTerm::of(X));
  Subst s;
  s.bind(loc("y"), Term::of(loc("X")));
  SymbolicHeap out = s(h);
  REQUIRE(out.exists.size() == 1);
  CHECK(out.exists[0] != X);
  CHECK(free_vars(out.pure).count(out.exists[0]) == 1);
}

TEST_CASE("gaifman graph construction") {
  Var E = loc("E"), X = loc("X"), Y = loc("Y");
  PointsTo c1;
  c1.root = LocTerm::of(E);
  c1.cells.emplace("next", Term::of(X));

  SUBCASE("single edge") {
    GaifmanGraph g = gaifman_graph({SpatialAtom(c1)});
    CHECK(g.vertices == std::set<LocTerm>{LocTerm::of(E), LocTerm::of(X)});
    CHECK(g.arcs.size() == 1);
    CHECK(g.connected_dag_rooted_at(LocTerm::of(E)));
    CHECK(g.has_outgoing(LocTerm::of(E)));
    CHECK(!g.has_outgoing(LocTerm::of(X)));
  }

  SUBCASE("two-cell path") {
    PointsTo c2;
    c2.root = LocTerm::of(X);
    c2.cells.emplace("next", Term::of(Y));
    GaifmanGraph g = gaifman_graph({SpatialAtom(c1), SpatialAtom(c2)});
    CHECK(g.vertices.size() == 3);
    CHECK(g.connected_dag_rooted_at(LocTerm::of(E)));
    CHECK(!g.connected_dag_rooted_at(LocTerm::of(X)));
  }

  SUBCASE("empty graph") {
    GaifmanGraph g = gaifman_graph({});
    CHECK(g.vertices.empty());
    CHECK(g.connected_dag_rooted_at(LocTerm::of(E)));
  }

  SUBCASE("cycle is not a DAG") {
    PointsTo c2;
    c2.root = LocTerm::of(X);
    c2.cells.emplace("next", Term::of(E));
    GaifmanGraph g = gaifman_graph({SpatialAtom(c1), SpatialAtom(c2)});
    CHECK(!g.connected_dag_rooted_at(LocTerm::of(E)));
  }
}

TEST_CASE("well-formedness clauses") {
  SUBCASE("root atom must sit at the source parameter") {
    Problem p = load_fixture("wf/lsegb.slent");
    auto report = check_wellformed(p.defs.at("lsegb"), p.defs);
    REQUIRE(!report.ok());
    CHECK(report.violations[0].clause == WfClause::RootAtoms);
  }

  SUBCASE("two cells per unfolding are fine") {
    Problem p = load_fixture("wf/lsegeven.slent");
    CHECK(check_wellformed(p.defs.at("lsegeven"), p.defs).ok());
  }

  SUBCASE("bst and bsthole are well-formed") {
    Problem p = load_fixture("defs/bst.slent");
    CHECK(check_wellformed(p.defs.at("bst"), p.defs).ok());
    CHECK(check_wellformed(p.defs.at("bsthole"), p.defs).ok());
  }

  SUBCASE("disconnected points-to part") {
    Problem p = load_fixture("wf/disconnected.slent");
    auto report = check_wellformed(p.defs.at("disc"), p.defs);
    REQUIRE(!report.ok());
    bool has_connectedness = false;
    for (const auto& v : report.violations)
      if (v.clause == WfClause::Connectedness) has_connectedness = true;
    CHECK(has_connectedness);
  }

  SUBCASE("predicate atoms must sit at sinks") {
    Problem p = load_fixture("wf/lsegeven.slent");
    InductiveDef def = p.defs.at("lsegeven");
    for (auto& a : def.rules[1].spatial) {
      if (auto* pa = std::get_if<PredAtom>(&a)) pa->args[0] = Term::of(def.params[0]);
    }
    auto report = check_wellformed(def, p.defs);
    REQUIRE(!report.ok());
    CHECK(report.violations[0].clause == WfClause::PredicateAtoms);
  }

  SUBCASE("unknown predicate") {
    Problem p = load_fixture("wf/lsegeven.slent");
    InductiveDef def = p.defs.at("lsegeven");
    for (auto& a : def.rules[1].spatial)
      if (auto* pa = std::get_if<PredAtom>(&a)) pa->pred = "nothere";
    auto report = check_wellformed(def, p.defs);
    REQUIRE(!report.ok());
    CHECK(report.violations[0].clause == WfClause::UnknownPredicate);
  }

  SUBCASE("alpha renaming preserves verdicts") {
    Problem p = load_fixture("defs/bst.slent");
    InductiveDef def = p.defs.at("bsthole");
    Subst ren;
    ren.bind(loc("X"), Term::of(loc("XX")));
    ren.bind(loc("Y"), Term::of(loc("YY")));
    ren.bind(mv("M3"), Term::of(mv("ZZ3")));
    for (auto& rule : def.rules) {
      for (auto& b : rule.exists) {
        if (const Term* t = ren.find(b)) b = *t->as_var();
      }
      rule.pure = ren(rule.pure);
      rule.spatial = ren(rule.spatial);
    }
    CHECK(check_wellformed(def, p.defs).ok());
  }
}

TEST_CASE("rule kind classification") {
  Problem p = load_fixture("defs/bst.slent");
  const auto& bst = p.defs.at("bst");
  CHECK(bst.rules[0].kind() == RuleKind::BaseEmpty);
  CHECK(bst.rules[1].kind() == RuleKind::Inductive);
}

TEST_CASE("gaifman graph of accepted rules is a rooted DAG") {
  for (const char* file : {"defs/lseg.slent", "defs/bst.slent", "defs/bst_variants.slent",
                           "defs/tail_variants.slent", "wf/lsegeven.slent"}) {
    Problem p = load_fixture(file);
    for (const auto& [name, def] : p.defs) {
      REQUIRE(check_wellformed(def, p.defs).ok());
      for (const auto& rule : def.rules) {
        if (rule.kind() != RuleKind::Inductive) continue;
        std::vector<SpatialAtom> cells;
        for (const auto& a : rule.spatial)
          if (std::holds_alternative<PointsTo>(a)) cells.push_back(a);
        GaifmanGraph g = gaifman_graph(cells);
        CHECK(g.connected_dag_rooted_at(LocTerm::of(rule.params[0])));
      }
    }
  }
}
