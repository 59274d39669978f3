#include <doctest.h>

#include "helpers.hpp"
#include "slent/oracle.hpp"

using namespace slent;
using namespace slent::test;

namespace {

Value locv(int id) { return Value{Sort::Loc, id, {}}; }
Value intv(long long n) { return Value{Sort::Int, n, {}}; }
Value msetv(std::vector<long long> m) {
  std::sort(m.begin(), m.end());
  return Value{Sort::Mset, 0, std::move(m)};
}

/// x1 |-> (next x2, data v1) * x2 |-> (next nil, data v2), sorted
BoundedModel two_cell_chain(long long v1, long long v2) {
  BoundedModel m;
  m.stack.emplace(loc("x1"), locv(1));
  m.stack.emplace(loc("x2"), locv(2));
  m.stack.emplace(iv("v1"), intv(v1));
  m.stack.emplace(iv("v2"), intv(v2));
  m.heap[1] = {{"next", locv(2)}, {"data", intv(v1)}};
  m.heap[2] = {{"next", locv(0)}, {"data", intv(v2)}};
  return m;
}

SymbolicHeap heap_of(const std::string& pure, const std::string& spatial,
                     const std::string& binders, const Problem& base) {
  std::string text;
  for (const auto& [f, s] : base.field_decls)
    text += "(declare-field " + f + " " + sort_name(s) + ")\n";
  text += print_problem(base);
  // strip any existing query: fixtures used here are definition-only
  text += "(check-entail (lhs (heap (exists (" + binders + ")) (pure " + pure + ") (spatial " +
          spatial + "))) (rhs (heap (exists ()) (pure) (spatial emp))))";
  Problem p = parse_problem(text);
  return p.query->lhs.disjuncts[0];
}

}  // namespace

TEST_CASE("satisfaction of points-to and predicate atoms") {
  Problem defs = load_fixture("defs/lseg.slent");
  Bounds b;
  Oracle oracle(defs.defs, b);

  SUBCASE("a sorted two-cell chain is a segment storing both values") {
    // exists M. lseg(x1, M, nil, emptyset): binders are enumerated
    std::string text = read_file(fixture_path("defs/lseg.slent")) +
                       "(check-entail (lhs (heap (exists ((M Mset))) (pure) "
                       "(spatial (pred lseg x1 M nil emptyset)))) "
                       "(rhs (heap (exists ()) (pure) (spatial emp))))";
    Problem p = parse_problem(text);
    // note: the lhs is skolemized, so use a hand-built heap instead
    SymbolicHeap h;
    Var M = mv("M");
    h.exists = {M};
    h.spatial.push_back(PredAtom{
        "lseg",
        {Term::of(loc("x1")), Term::of(M), Term(LocTerm::nil()), Term(DataTerm::empty_set())}});

    CHECK(oracle.satisfies(two_cell_chain(0, 1), h));
    CHECK(oracle.satisfies(two_cell_chain(1, 1), h));
    // out of order: not a sorted segment
    CHECK(!oracle.satisfies(two_cell_chain(2, 1), h));
  }

  SUBCASE("pinned content") {
    SymbolicHeap h;
    h.spatial.push_back(PredAtom{
        "lseg",
        {Term::of(loc("x1")), Term::of(mv("M")), Term(LocTerm::nil()), Term(DataTerm::empty_set())}});
    BoundedModel m = two_cell_chain(0, 2);
    m.stack.emplace(mv("M"), msetv({0, 2}));
    CHECK(oracle.satisfies(m, h));
    BoundedModel wrong = two_cell_chain(0, 2);
    wrong.stack.emplace(mv("M"), msetv({0, 1}));
    CHECK(!oracle.satisfies(wrong, h));
  }

  SUBCASE("empty heap satisfies the base case") {
    BoundedModel m;
    m.stack.emplace(loc("x"), locv(3));
    m.stack.emplace(loc("y"), locv(3));
    m.stack.emplace(mv("M"), msetv({1}));
    m.stack.emplace(mv("N"), msetv({1}));
    SymbolicHeap h;
    h.spatial.push_back(PredAtom{
        "lseg", {Term::of(loc("x")), Term::of(mv("M")), Term::of(loc("y")), Term::of(mv("N"))}});
    CHECK(oracle.satisfies(m, h));
    m.stack[mv("N")] = msetv({2});
    CHECK(!oracle.satisfies(m, h));
  }

  SUBCASE("one cell, one unfolding") {
    BoundedModel m;
    m.stack.emplace(loc("x"), locv(1));
    m.heap[1] = {{"next", locv(0)}, {"data", intv(2)}};
    SymbolicHeap h;
    Var M = mv("M");
    h.exists = {M};
    h.spatial.push_back(PredAtom{
        "lseg", {Term::of(loc("x")), Term::of(M), Term(LocTerm::nil()), Term(DataTerm::empty_set())}});
    h.pure.add_data(DataAtom::member(DataTerm::lit(2), DataTerm::var(M)));
    CHECK(oracle.satisfies(m, h));
  }

  SUBCASE("points-to needs the exact field set") {
    BoundedModel m = two_cell_chain(0, 1);
    SymbolicHeap h;
    PointsTo c1;
    c1.root = LocTerm::of(loc("x1"));
    c1.cells.emplace("next", Term::of(loc("x2")));
    h.spatial.push_back(c1);  // missing the data field
    PointsTo c2;
    c2.root = LocTerm::of(loc("x2"));
    c2.cells.emplace("next", Term(LocTerm::nil()));
    c2.cells.emplace("data", Term::of(iv("v2")));
    h.spatial.push_back(c2);
    CHECK(!oracle.satisfies(m, h));
  }
}

TEST_CASE("partition enumeration is exhaustive") {
  Problem defs = load_fixture("defs/lseg.slent");
  Bounds b;
  Oracle oracle(defs.defs, b);
  // two conjuncts over an n-cell heap: exactly 2^n splits per pair
  for (int n = 1; n <= 3; ++n) {
    BoundedModel m;
    for (int i = 1; i <= n; ++i) m.heap[i] = {{"next", locv(0)}, {"data", intv(0)}};
    m.stack.emplace(loc("x"), locv(1));
    SymbolicHeap h;
    h.spatial.push_back(PredAtom{
        "lseg",
        {Term::of(loc("x")), Term(DataTerm::empty_set()), Term(LocTerm::nil()),
         Term(DataTerm::empty_set())}});
    h.spatial.push_back(PredAtom{
        "lseg",
        {Term::of(loc("x")), Term(DataTerm::empty_set()), Term::of(loc("x")),
         Term(DataTerm::empty_set())}});
    oracle.partition_visits = 0;
    (void)oracle.satisfies(m, h);
    CHECK(oracle.partition_visits == (1 << n));
  }
}

TEST_CASE("refutation") {
  SUBCASE("a list is not a tree") {
    Problem p = load_fixture("invalid_lseg_bst.slent");
    Bounds small;
    small.max_cells = 1;
    Oracle oracle(p.defs, small);
    auto counter = oracle.refute_entailment(p.query->lhs, p.query->rhs);
    REQUIRE(counter.has_value());
    CHECK(counter->heap.size() == 1);
    // monotone in the bounds: found again at the defaults
    Oracle big(p.defs, Bounds{});
    CHECK(big.refute_entailment(p.query->lhs, p.query->rhs).has_value());
  }

  SUBCASE("an entailment against itself has no countermodel") {
    Problem p = load_fixture("rdbi/sls_exit_found.slent");
    // lhs |= lhs rendered as formulas
    Formula lhs = p.query->lhs;
    Bounds b;
    b.max_cells = 3;
    Oracle oracle(p.defs, b);
    CHECK(!oracle.refute_entailment(lhs, lhs).has_value());
  }

  SUBCASE("reversed composition has a countermodel") {
    // lseg(e1,M1,e3,M3) does not generally split at a fixed free e2
    std::string text = read_file(fixture_path("defs/lseg.slent")) + R"(
(check-entail
  (lhs (heap (exists ()) (pure) (spatial (pred lseg e1 M1 e3 M3))))
  (rhs (heap (exists ((Ma Mset)))
    (pure)
    (spatial (pred lseg e1 M1 e2 Ma) (pred lseg e2 Ma e3 M3)))))
)";
    Problem p = parse_problem(text);
    Bounds b;
    b.max_cells = 2;
    b.loc_universe = 4;
    Oracle oracle(p.defs, b);
    CHECK(oracle.refute_entailment(p.query->lhs, p.query->rhs).has_value());
  }
}

TEST_CASE("lemma checking") {
  DataSolver solver;

  SUBCASE("the ported segment's lemmas are sound at small bounds") {
    Problem p = load_fixture("defs/lseg.slent");
    LemmaSet ls = generate_all_lemmas(p.defs, solver);
    Bounds b;
    b.max_cells = 3;
    b.loc_universe = 4;
    b.data_domain = {0, 1};
    b.max_multiplicity = 2;
    Oracle oracle(p.defs, b);
    for (const auto& l : ls.lemmas) {
      CAPTURE(l.id);
      CHECK(!oracle.check_lemma(l).has_value());
    }
  }

  SUBCASE("corrupted hole wiring is refuted") {
    Problem p = load_fixture("defs/lseg.slent");
    const auto& def = p.defs.at("lseg");
    CompReport r = classify_compositional(def);
    REQUIRE(r.ok);
    Lemma comp = make_composition_lemma(def, *r.roles);
    // break the bridge: the second atom starts at a fresh location
    Lemma broken = comp;
    auto& rest = std::get<PredAtom>(broken.premise_rest[0]);
    Var stray = loc("stray");
    rest.args[0] = Term::of(stray);
    broken.premise_exists.push_back(stray);
    Bounds b;
    b.max_cells = 2;
    b.loc_universe = 4;
    b.data_domain = {0, 1};
    b.max_multiplicity = 2;
    Oracle oracle(p.defs, b);
    CHECK(oracle.check_lemma(broken).has_value());
  }
}

TEST_CASE("bounds parsing round-trips") {
  auto b = parse_bounds("cells=4,locs=5,data=0..2,mult=4");
  REQUIRE(b.has_value());
  CHECK(b->max_cells == 4);
  CHECK(b->loc_universe == 5);
  CHECK(b->data_domain == std::vector<long long>{0, 1, 2});
  CHECK(b->max_multiplicity == 4);
  CHECK(b->to_string() == "cells=4,locs=5,data=0..2,mult=4");
  CHECK(!parse_bounds("cells=").has_value());
  CHECK(!parse_bounds("bogus=1").has_value());
}

TEST_CASE("model printing is readable") {
  BoundedModel m = two_cell_chain(0, 1);
  m.stack.emplace(mv("M"), msetv({0, 1}));
  std::string s = print_model(m);
  CHECK(s.find("x1 = loc1") != std::string::npos);
  CHECK(s.find("M = {0,1}") != std::string::npos);
  CHECK(s.find("loc2 |->") != std::string::npos);
}
