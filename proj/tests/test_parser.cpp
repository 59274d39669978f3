#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "slent/problem.hpp"

using namespace slent;
using namespace slent::test;

TEST_CASE("parses the two-cell example") {
  Problem p = load_fixture("appd.slent");
  CHECK(p.defs.size() == 1);
  REQUIRE(p.query.has_value());
  CHECK(p.query->lhs.disjuncts.size() == 1);
  CHECK(p.query->rhs.disjuncts.size() == 1);
  const auto& lhs = p.query->lhs.disjuncts[0];
  CHECK(lhs.exists.empty());
  CHECK(lhs.spatial.size() == 2);
  CHECK(lhs.pure.loc_neqs.size() == 2);
  const auto& rhs = p.query->rhs.disjuncts[0];
  REQUIRE(rhs.exists.size() == 1);
  CHECK(rhs.exists[0].sort == Sort::Mset);
}

TEST_CASE("empty input is a syntax error") {
  CHECK_THROWS_AS(parse_problem(""), FrontendError);
  try {
    parse_problem("");
  } catch (const FrontendError& e) {
    CHECK(e.kind == FrontendError::Kind::Syntax);
  }
}

TEST_CASE("location binders on the right are rejected") {
  std::string text = R"(
(declare-field next Loc)
(define-pred ls ((E Loc) (F Loc))
  (rule (exists ()) (pure (= E F)) (spatial emp))
  (rule (exists ((X Loc))) (pure) (spatial (pto E (next X)) (pred ls X F))))
(check-entail
  (lhs (heap (exists ()) (pure) (spatial (pred ls x nil))))
  (rhs (heap (exists ((X Loc))) (pure) (spatial (pred ls X nil)))))
)";
  try {
    parse_problem(text);
    FAIL("expected RhsLocationBinder");
  } catch (const FrontendError& e) {
    CHECK(e.kind == FrontendError::Kind::RhsLocationBinder);
  }
}

TEST_CASE("errors carry positions and kinds") {
  try {
    parse_problem("(declare-field next Loc)\n(define-pred");
    FAIL("expected syntax error");
  } catch (const FrontendError& e) {
    CHECK(e.kind == FrontendError::Kind::Syntax);
    CHECK(e.line >= 1);
  }
  try {
    parse_problem("(declare-field next Loc)\n(check-entail (lhs (heap (exists ()) (pure) "
                  "(spatial (pred nosuch x)))) (rhs (heap (exists ()) (pure) (spatial emp))))");
    FAIL("expected unknown identifier");
  } catch (const FrontendError& e) {
    CHECK(e.kind == FrontendError::Kind::UnknownIdentifier);
  }
  try {
    parse_problem("(declare-field d Int)\n(check-entail (lhs (heap (exists ()) "
                  "(pure (< x nil)) (spatial emp))) (rhs (heap (exists ()) (pure) (spatial emp))))");
    FAIL("expected sort error");
  } catch (const FrontendError& e) {
    CHECK(e.kind == FrontendError::Kind::Sort);
  }
}

TEST_CASE("reserved prefix is rejected in definitions") {
  CHECK_THROWS_AS(parse_problem("(define-pred %p ((E Loc)) (rule (exists ()) (pure) (spatial emp)))"),
                  FrontendError);
}

TEST_CASE("left existentials are skolemized, right binders are split") {
  std::string text = R"(
(declare-field next Loc)
(declare-field data Int)
(define-pred lseg ((E Loc) (M Mset) (F Loc) (M2 Mset))
  (rule (exists ()) (pure (= E F) (= M M2)) (spatial emp))
  (rule (exists ((X Loc) (v Int) (M1 Mset)))
    (pure (allle v M1) (= M (union (set v) M1)))
    (spatial (pto E (next X) (data v)) (pred lseg X M1 F M2))))
(check-entail
  (lhs (heap (exists ((y Loc))) (pure) (spatial (pto x (next y) (data v)) (pred lseg y N nil emptyset))))
  (rhs (heap (exists ((M Mset))) (pure) (spatial (pred lseg x M x M) (pred lseg x M nil emptyset)))))
)";
  Problem p = parse_problem(text);
  const auto& lhs = p.query->lhs.disjuncts[0];
  CHECK(lhs.exists.empty());  // skolemized
  bool found_skolem = false;
  for (const auto& v : free_vars(lhs))
    if (v.name.rfind("%sk", 0) == 0) found_skolem = true;
  CHECK(found_skolem);

  const auto& rhs = p.query->rhs.disjuncts[0];
  // M occurred three times spatially: every occurrence got its own binder
  CHECK(rhs.exists.size() == 4);
  std::set<Var> spatial_binders;
  for (const auto& a : rhs.spatial)
    for (const auto& v : free_vars(a))
      if (v.name.rfind("%q", 0) == 0) spatial_binders.insert(v);
  CHECK(spatial_binders.size() == 3);
  // and the pure part ties them back with equalities
  CHECK(rhs.pure.data_atoms.size() == 3);
}

TEST_CASE("round trips are alpha-equivalent") {
  for (const char* file :
       {"appd.slent", "defs/lseg.slent", "defs/bst.slent", "defs/bst_variants.slent",
        "defs/tail_variants.slent", "defs/neqbsthole.slent", "rdbi/bsts_step_left.slent",
        "rdbi/sli_mid.slent", "shape/skl_step.slent", "unsat_lhs.slent"}) {
    CAPTURE(file);
    Problem p = load_fixture(file);
    Problem q = parse_problem(print_problem(p));
    CHECK(alpha_equivalent(p, q));
  }
}

namespace {

/// Well-sorted random problems exercise the full grammar.
std::string random_problem(std::mt19937& rng) {
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> pick3(0, 2);
  std::ostringstream out;
  out << "(declare-field next Loc)\n(declare-field data Int)\n";
  out << "(define-pred ls ((E Loc) (M Mset) (F Loc) (M2 Mset))\n"
         "  (rule (exists ()) (pure (= E F) (= M M2)) (spatial emp))\n"
         "  (rule (exists ((X Loc) (v Int) (M1 Mset)))\n"
         "    (pure (allle v M1) (= M (union (set v) M1)))\n"
         "    (spatial (pto E (next X) (data v)) (pred ls X M1 F M2))))\n";
  std::vector<std::string> locs = {"a", "b", "c", "nil"};
  std::vector<std::string> ints = {"u", "w", "1", "-2"};
  std::vector<std::string> msets = {"Ma", "Mb", "emptyset", "(set 1)", "(union Ma (set u))"};
  auto lv = [&] { return locs[rng() % locs.size()]; };
  auto dv = [&] { return ints[rng() % ints.size()]; };
  auto mvt = [&] { return msets[rng() % msets.size()]; };
  auto heap = [&](bool rhs_side) {
    std::ostringstream h;
    h << "(heap (exists (";
    if (rhs_side && coin(rng)) h << "(Q Mset)";
    h << ")) (pure";
    int purity = pick3(rng);
    if (purity > 0) h << " (distinct " << lv() << " " << lv() << ")";
    if (purity > 1) h << " (<= " << dv() << " " << dv() << ") (in " << dv() << " " << mvt() << ")";
    h << ") (spatial";
    int n = 1 + pick3(rng);
    for (int i = 0; i < n; ++i) {
      if (coin(rng)) {
        h << " (pred ls " << lv() << " " << (rhs_side && i == 0 && coin(rng) ? "Q" : mvt()) << " "
          << lv() << " " << mvt() << ")";
      } else {
        h << " (pto x" << i << " (next " << lv() << ") (data " << dv() << "))";
      }
    }
    h << "))";
    return h.str();
  };
  out << "(check-entail (lhs " << heap(false) << ") (rhs " << heap(true) << "))\n";
  return out.str();
}

}  // namespace

TEST_CASE("round-trip property on random problems") {
  std::mt19937 rng(12345);
  int checked = 0;
  for (int i = 0; i < 1000; ++i) {
    std::string text = random_problem(rng);
    Problem p;
    try {
      p = parse_problem(text);
    } catch (const FrontendError&) {
      continue;  // e.g. a random binder Q that never occurs stays unsorted
    }
    ++checked;
    CAPTURE(text);
    Problem q = parse_problem(print_problem(p));
    REQUIRE(alpha_equivalent(p, q));
  }
  CHECK(checked > 800);
}
