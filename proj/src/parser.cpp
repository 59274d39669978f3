#include <algorithm>
#include <cctype>
#include <functional>
#include <set>
#include <sstream>

#include "slent/problem.hpp"

namespace slent {

namespace {

struct Sexp {
  enum class Kind { List, Symbol, Number, String };
  Kind kind = Kind::List;
  std::vector<Sexp> items;
  std::string text;
  long long num = 0;
  int line = 0, col = 0;

  bool is_sym(const char* s) const { return kind == Kind::Symbol && text == s; }
};

[[noreturn]] void syntax_error(int line, int col, const std::string& expected) {
  throw FrontendError(FrontendError::Kind::Syntax, line, col,
                      std::to_string(line) + ":" + std::to_string(col) + ": expected " + expected);
}

[[noreturn]] void sort_error(const Sexp& at, const std::string& msg) {
  throw FrontendError(FrontendError::Kind::Sort, at.line, at.col,
                      std::to_string(at.line) + ":" + std::to_string(at.col) + ": " + msg);
}

[[noreturn]] void unknown_identifier(const Sexp& at, const std::string& name) {
  throw FrontendError(FrontendError::Kind::UnknownIdentifier, at.line, at.col,
                      std::to_string(at.line) + ":" + std::to_string(at.col) +
                          ": unknown identifier " + name);
}

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) {}

  std::vector<Sexp> read_all() {
    std::vector<Sexp> forms;
    skip_ws();
    while (pos_ < text_.size()) {
      forms.push_back(read());
      skip_ws();
    }
    return forms;
  }

 private:
  Sexp read() {
    skip_ws();
    if (pos_ >= text_.size()) syntax_error(line_, col_, "a form");
    int line = line_, col = col_;
    char c = text_[pos_];
    if (c == '(') {
      advance();
      Sexp list;
      list.kind = Sexp::Kind::List;
      list.line = line;
      list.col = col;
      skip_ws();
      while (pos_ < text_.size() && text_[pos_] != ')') {
        list.items.push_back(read());
        skip_ws();
      }
      if (pos_ >= text_.size()) syntax_error(line_, col_, "')'");
      advance();
      return list;
    }
    if (c == ')') syntax_error(line, col, "a form, found ')'");
    if (c == '"') {
      advance();
      Sexp s;
      s.kind = Sexp::Kind::String;
      s.line = line;
      s.col = col;
      while (pos_ < text_.size() && text_[pos_] != '"') {
        s.text += text_[pos_];
        advance();
      }
      if (pos_ >= text_.size()) syntax_error(line_, col_, "closing '\"'");
      advance();
      return s;
    }
    std::string tok;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
           text_[pos_] != '(' && text_[pos_] != ')' && text_[pos_] != ';') {
      tok += text_[pos_];
      advance();
    }
    Sexp s;
    s.line = line;
    s.col = col;
    bool numeric = !tok.empty() && (std::isdigit(static_cast<unsigned char>(tok[0])) ||
                                    (tok[0] == '-' && tok.size() > 1 &&
                                     std::isdigit(static_cast<unsigned char>(tok[1]))));
    if (numeric) {
      s.kind = Sexp::Kind::Number;
      try {
        s.num = std::stoll(tok);
      } catch (...) {
        syntax_error(line, col, "an integer literal");
      }
    } else {
      s.kind = Sexp::Kind::Symbol;
      s.text = tok;
    }
    return s;
  }

  void skip_ws() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == ';') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  const std::string& text_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
};

Sort parse_sort(const Sexp& s) {
  if (s.kind == Sexp::Kind::Symbol) {
    if (s.text == "Loc") return Sort::Loc;
    if (s.text == "Int") return Sort::Int;
    if (s.text == "Mset") return Sort::Mset;
  }
  syntax_error(s.line, s.col, "a sort (Loc, Int or Mset)");
}

const Sexp& expect_list(const Sexp& s, const char* what) {
  if (s.kind != Sexp::Kind::List) syntax_error(s.line, s.col, what);
  return s;
}

const std::string& expect_symbol(const Sexp& s, const char* what) {
  if (s.kind != Sexp::Kind::Symbol) syntax_error(s.line, s.col, what);
  return s.text;
}

/// Scope for term construction: maps names to sorted variables.
struct Scope {
  std::map<std::string, Var> vars;
  bool allow_unknown = false;           // query scope: unknown names resolved later
  std::map<std::string, Sort>* inferred = nullptr;

  std::optional<Var> lookup(const std::string& name) const {
    auto it = vars.find(name);
    if (it != vars.end()) return it->second;
    if (inferred) {
      auto jt = inferred->find(name);
      if (jt != inferred->end()) return Var{name, jt->second};
    }
    return std::nullopt;
  }
};

// ---------------------------------------------------------------------------
// Sort inference for free query variables.
//
// Walks the raw s-expressions of the query heaps and accumulates sorts for
// names that are not binders, from structurally sorted positions. Repeats
// until a fixpoint so equalities can transport sorts across atoms.

class SortInference {
 public:
  SortInference(const std::map<std::string, Sort>& fields, const DefMap& defs)
      : fields_(fields), defs_(defs) {}

  std::map<std::string, Sort> run(const std::vector<const Sexp*>& heaps) {
    for (const Sexp* h : heaps) collect_binders(*h);
    bool changed = true;
    int rounds = 0;
    while (changed && rounds++ < 50) {
      changed = false;
      for (size_t i = 0; i < heaps.size(); ++i) walk_heap(*heaps[i], i, changed);
      if (!changed && !defaults_done_) {
        // last resort: a bare name compared element-wise against a known
        // multiset is taken as an integer
        defaults_done_ = true;
        for (size_t i = 0; i < heaps.size(); ++i) default_allcmp(*heaps[i], i, changed);
      }
    }
    return global_;
  }

 private:
  void collect_binders(const Sexp& heap) {
    binders_.emplace_back();
    for (const auto& clause : heap.items) {
      if (clause.kind != Sexp::Kind::List || clause.items.empty()) continue;
      if (!clause.items[0].is_sym("exists")) continue;
      if (clause.items.size() != 2) syntax_error(clause.line, clause.col, "(exists ((x sort)...))");
      for (const auto& b : expect_list(clause.items[1], "binder list").items) {
        const auto& bl = expect_list(b, "(name sort)");
        if (bl.items.size() != 2) syntax_error(b.line, b.col, "(name sort)");
        binders_.back()[expect_symbol(bl.items[0], "binder name")] = parse_sort(bl.items[1]);
      }
    }
  }

  void assign(const std::string& name, Sort s, size_t heap_idx, bool& changed, const Sexp& at) {
    auto bit = binders_[heap_idx].find(name);
    if (bit != binders_[heap_idx].end()) {
      if (bit->second != s)
        sort_error(at, name + " declared " + sort_name(bit->second) + " but used as " + sort_name(s));
      return;
    }
    auto it = global_.find(name);
    if (it == global_.end()) {
      global_[name] = s;
      changed = true;
    } else if (it->second != s) {
      sort_error(at, name + " used both as " + sort_name(it->second) + " and " + sort_name(s));
    }
  }

  /// Sort of a term when structurally evident, nullopt for bare names
  /// not yet known.
  std::optional<Sort> term_sort(const Sexp& t, size_t heap_idx) {
    if (t.kind == Sexp::Kind::Number) return Sort::Int;
    if (t.kind == Sexp::Kind::Symbol) {
      if (t.text == "nil") return Sort::Loc;
      if (t.text == "emptyset") return Sort::Mset;
      auto bit = binders_[heap_idx].find(t.text);
      if (bit != binders_[heap_idx].end()) return bit->second;
      auto it = global_.find(t.text);
      if (it != global_.end()) return it->second;
      return std::nullopt;
    }
    if (t.items.empty()) return std::nullopt;
    const std::string& head = expect_symbol(t.items[0], "a term operator");
    if (head == "+" || head == "-") return Sort::Int;
    if (head == "set" || head == "union") return Sort::Mset;
    return std::nullopt;
  }

  void force(const Sexp& t, Sort s, size_t heap_idx, bool& changed) {
    if (t.kind == Sexp::Kind::Symbol && t.text != "nil" && t.text != "emptyset") {
      assign(t.text, s, heap_idx, changed, t);
      return;
    }
    if (t.kind != Sexp::Kind::List || t.items.empty()) return;
    const std::string& head = expect_symbol(t.items[0], "a term operator");
    if (head == "+" || head == "-") {
      for (size_t i = 1; i < t.items.size(); ++i) force(t.items[i], Sort::Int, heap_idx, changed);
    } else if (head == "set") {
      for (size_t i = 1; i < t.items.size(); ++i) force(t.items[i], Sort::Int, heap_idx, changed);
    } else if (head == "union") {
      for (size_t i = 1; i < t.items.size(); ++i) force(t.items[i], Sort::Mset, heap_idx, changed);
    }
  }

  void walk_heap(const Sexp& heap, size_t heap_idx, bool& changed) {
    for (const auto& clause : heap.items) {
      if (clause.kind != Sexp::Kind::List || clause.items.empty()) continue;
      const Sexp& tag = clause.items[0];
      if (tag.is_sym("pure")) {
        for (size_t i = 1; i < clause.items.size(); ++i) walk_pure(clause.items[i], heap_idx, changed);
      } else if (tag.is_sym("spatial")) {
        for (size_t i = 1; i < clause.items.size(); ++i)
          walk_spatial(clause.items[i], heap_idx, changed);
      }
    }
  }

  void walk_spatial(const Sexp& a, size_t heap_idx, bool& changed) {
    if (a.is_sym("emp")) return;
    const auto& l = expect_list(a, "a spatial atom");
    if (l.items.empty()) syntax_error(a.line, a.col, "a spatial atom");
    const std::string& head = expect_symbol(l.items[0], "pto, pred or sep");
    if (head == "sep") {
      for (size_t i = 1; i < l.items.size(); ++i) walk_spatial(l.items[i], heap_idx, changed);
    } else if (head == "pto") {
      if (l.items.size() < 2) syntax_error(a.line, a.col, "(pto root (field x)...)");
      force(l.items[1], Sort::Loc, heap_idx, changed);
      for (size_t i = 2; i < l.items.size(); ++i) {
        const auto& cell = expect_list(l.items[i], "(field x)");
        if (cell.items.size() != 2) syntax_error(cell.line, cell.col, "(field x)");
        auto fit = fields_.find(expect_symbol(cell.items[0], "a field name"));
        if (fit == fields_.end()) unknown_identifier(cell.items[0], cell.items[0].text);
        force(cell.items[1], fit->second, heap_idx, changed);
      }
    } else if (head == "pred") {
      if (l.items.size() < 2) syntax_error(a.line, a.col, "(pred name args...)");
      auto dit = defs_.find(expect_symbol(l.items[1], "a predicate name"));
      if (dit == defs_.end()) unknown_identifier(l.items[1], l.items[1].text);
      const auto& params = dit->second.params;
      if (l.items.size() - 2 != params.size())
        sort_error(a, dit->first + " expects " + std::to_string(params.size()) + " arguments");
      for (size_t i = 0; i < params.size(); ++i)
        force(l.items[2 + i], params[i].sort, heap_idx, changed);
    } else {
      syntax_error(a.line, a.col, "pto, pred or sep");
    }
  }

  void walk_pure(const Sexp& a, size_t heap_idx, bool& changed) {
    const auto& l = expect_list(a, "a pure atom");
    if (l.items.size() != 3) syntax_error(a.line, a.col, "a binary pure atom");
    const std::string& head = expect_symbol(l.items[0], "a pure operator");
    const Sexp& x = l.items[1];
    const Sexp& y = l.items[2];
    if (head == "in") {
      force(x, Sort::Int, heap_idx, changed);
      force(y, Sort::Mset, heap_idx, changed);
    } else if (head == "<" || head == "<=") {
      force(x, Sort::Int, heap_idx, changed);
      force(y, Sort::Int, heap_idx, changed);
    } else if (head == "=" || head == "distinct") {
      auto sx = term_sort(x, heap_idx);
      auto sy = term_sort(y, heap_idx);
      if (sx && !sy) force(y, *sx, heap_idx, changed);
      if (sy && !sx) force(x, *sy, heap_idx, changed);
    } else if (head == "alllt" || head == "allle") {
      auto sx = term_sort(x, heap_idx);
      auto sy = term_sort(y, heap_idx);
      if (sx == Sort::Int && !sy) force(y, Sort::Mset, heap_idx, changed);
      if (sy == Sort::Int && !sx) force(x, Sort::Mset, heap_idx, changed);
    }
  }

  void default_allcmp(const Sexp& heap, size_t heap_idx, bool& changed) {
    for (const auto& clause : heap.items) {
      if (clause.kind != Sexp::Kind::List || clause.items.empty()) continue;
      if (!clause.items[0].is_sym("pure")) continue;
      for (size_t i = 1; i < clause.items.size(); ++i) {
        const auto& a = clause.items[i];
        if (a.kind != Sexp::Kind::List || a.items.size() != 3) continue;
        if (!a.items[0].is_sym("alllt") && !a.items[0].is_sym("allle")) continue;
        auto sx = term_sort(a.items[1], heap_idx);
        auto sy = term_sort(a.items[2], heap_idx);
        if (sx == Sort::Mset && !sy) force(a.items[2], Sort::Int, heap_idx, changed);
        if (sy == Sort::Mset && !sx) force(a.items[1], Sort::Int, heap_idx, changed);
      }
    }
  }

  const std::map<std::string, Sort>& fields_;
  const DefMap& defs_;
  std::map<std::string, Sort> global_;
  std::vector<std::map<std::string, Sort>> binders_;
  bool defaults_done_ = false;
};

// ---------------------------------------------------------------------------
// Typed construction

class Builder {
 public:
  Builder(const std::map<std::string, Sort>& fields, const DefMap& defs)
      : fields_(fields), defs_(defs) {}

  Term term(const Sexp& t, const Scope& scope) {
    if (t.kind == Sexp::Kind::Number) return Term(DataTerm::lit(t.num));
    if (t.kind == Sexp::Kind::Symbol) {
      if (t.text == "nil") return Term(LocTerm::nil());
      if (t.text == "emptyset") return Term(DataTerm::empty_set());
      auto v = scope.lookup(t.text);
      if (!v) unknown_identifier(t, t.text);
      return Term::of(*v);
    }
    const auto& l = expect_list(t, "a term");
    if (l.items.empty()) syntax_error(t.line, t.col, "a term");
    const std::string& head = expect_symbol(l.items[0], "a term operator");
    try {
      if (head == "+") {
        if (l.items.size() < 3) syntax_error(t.line, t.col, "(+ t t ...)");
        DataTerm acc = data(l.items[1], scope);
        for (size_t i = 2; i < l.items.size(); ++i)
          acc = DataTerm::add(acc, data(l.items[i], scope));
        return Term(acc);
      }
      if (head == "-") {
        if (l.items.size() != 2) syntax_error(t.line, t.col, "(- t)");
        return Term(DataTerm::neg(data(l.items[1], scope)));
      }
      if (head == "set") {
        if (l.items.size() < 2) syntax_error(t.line, t.col, "(set t ...)");
        DataTerm acc = DataTerm::singleton(data(l.items[1], scope));
        for (size_t i = 2; i < l.items.size(); ++i)
          acc = DataTerm::mset_union(acc, DataTerm::singleton(data(l.items[i], scope)));
        return Term(acc);
      }
      if (head == "union") {
        if (l.items.size() < 3) syntax_error(t.line, t.col, "(union t t ...)");
        DataTerm acc = mset(l.items[1], scope);
        for (size_t i = 2; i < l.items.size(); ++i)
          acc = DataTerm::mset_union(acc, mset(l.items[i], scope));
        return Term(acc);
      }
    } catch (const SortError& e) {
      sort_error(t, e.what());
    }
    syntax_error(t.line, t.col, "a term operator");
  }

  DataTerm data(const Sexp& t, const Scope& scope) {
    Term r = term(t, scope);
    if (r.is_loc()) sort_error(t, "expected a data term, found a location");
    return r.data();
  }

  DataTerm mset(const Sexp& t, const Scope& scope) {
    DataTerm r = data(t, scope);
    if (r.sort() != Sort::Mset) sort_error(t, "expected a Mset term");
    return r;
  }

  void pure_atom(const Sexp& a, const Scope& scope, PureFormula& out) {
    const auto& l = expect_list(a, "a pure atom");
    if (l.items.size() != 3) syntax_error(a.line, a.col, "a binary pure atom");
    const std::string& head = expect_symbol(l.items[0], "a pure operator");
    Term x = term(l.items[1], scope);
    Term y = term(l.items[2], scope);
    try {
      if (head == "=") {
        if (x.is_loc() != y.is_loc()) sort_error(a, "equality between different sorts");
        if (x.is_loc()) {
          out.add_loc_eq(x.loc(), y.loc());
        } else if (x.sort() == Sort::Mset) {
          out.add_data(DataAtom::mset_eq(x.data(), y.data()));
        } else {
          out.add_data(DataAtom::int_cmp(CmpOp::Eq, x.data(), y.data()));
        }
      } else if (head == "distinct") {
        if (x.is_loc() != y.is_loc()) sort_error(a, "disequality between different sorts");
        if (x.is_loc()) {
          out.add_loc_neq(x.loc(), y.loc());
        } else if (x.sort() == Sort::Mset) {
          sort_error(a, "multiset disequality is not in the fragment");
        } else {
          out.add_data(DataAtom::int_cmp(CmpOp::Ne, x.data(), y.data()));
        }
      } else if (head == "<" || head == "<=") {
        CmpOp op = head == "<" ? CmpOp::Lt : CmpOp::Le;
        out.add_data(DataAtom::int_cmp(op, dat(x, a), dat(y, a)));
      } else if (head == "in") {
        out.add_data(DataAtom::member(dat(x, a), dat(y, a)));
      } else if (head == "alllt" || head == "allle") {
        CmpOp op = head == "alllt" ? CmpOp::Lt : CmpOp::Le;
        out.add_data(DataAtom::all_cmp(op, dat(x, a), dat(y, a)));
      } else {
        syntax_error(a.line, a.col, "a pure operator");
      }
    } catch (const SortError& e) {
      sort_error(a, e.what());
    }
  }

  void spatial_atom(const Sexp& a, const Scope& scope, std::vector<SpatialAtom>& out) {
    if (a.is_sym("emp")) return;  // identity element
    const auto& l = expect_list(a, "a spatial atom");
    if (l.items.empty()) syntax_error(a.line, a.col, "a spatial atom");
    const std::string& head = expect_symbol(l.items[0], "pto, pred or sep");
    if (head == "sep") {
      for (size_t i = 1; i < l.items.size(); ++i) spatial_atom(l.items[i], scope, out);
      return;
    }
    if (head == "pto") {
      if (l.items.size() < 2) syntax_error(a.line, a.col, "(pto root (field x)...)");
      Term root = term(l.items[1], scope);
      if (!root.is_loc()) sort_error(l.items[1], "points-to root must be a location");
      PointsTo p;
      p.root = root.loc();
      for (size_t i = 2; i < l.items.size(); ++i) {
        const auto& cell = expect_list(l.items[i], "(field x)");
        if (cell.items.size() != 2) syntax_error(cell.line, cell.col, "(field x)");
        const std::string& field = expect_symbol(cell.items[0], "a field name");
        auto fit = fields_.find(field);
        if (fit == fields_.end()) unknown_identifier(cell.items[0], field);
        Term v = term(cell.items[1], scope);
        if (fit->second == Sort::Loc && !v.is_loc())
          sort_error(cell.items[1], "pointer field " + field + " needs a location");
        if (fit->second == Sort::Int && (v.is_loc() || v.sort() != Sort::Int))
          sort_error(cell.items[1], "data field " + field + " needs an Int term");
        if (p.cells.count(field)) sort_error(cell, "field " + field + " bound twice");
        p.cells.emplace(field, std::move(v));
      }
      out.push_back(std::move(p));
      return;
    }
    if (head == "pred") {
      if (l.items.size() < 2) syntax_error(a.line, a.col, "(pred name args...)");
      const std::string& name = expect_symbol(l.items[1], "a predicate name");
      auto dit = defs_.find(name);
      if (dit == defs_.end()) unknown_identifier(l.items[1], name);
      const auto& params = dit->second.params;
      if (l.items.size() - 2 != params.size())
        sort_error(a, name + " expects " + std::to_string(params.size()) + " arguments");
      PredAtom pa;
      pa.pred = name;
      for (size_t i = 0; i < params.size(); ++i) {
        Term t = term(l.items[2 + i], scope);
        if (t.sort() != params[i].sort)
          sort_error(l.items[2 + i], "argument " + std::to_string(i) + " of " + name +
                                         " must be " + sort_name(params[i].sort));
        pa.args.push_back(std::move(t));
      }
      out.push_back(std::move(pa));
      return;
    }
    syntax_error(a.line, a.col, "pto, pred or sep");
  }

 private:
  DataTerm dat(const Term& t, const Sexp& at) {
    if (t.is_loc()) sort_error(at, "expected a data term, found a location");
    return t.data();
  }

  const std::map<std::string, Sort>& fields_;
  const DefMap& defs_;
};

std::vector<Var> parse_binders(const Sexp& exists_clause, bool forbid_reserved) {
  std::vector<Var> out;
  if (exists_clause.items.size() != 2)
    syntax_error(exists_clause.line, exists_clause.col, "(exists ((x sort)...))");
  for (const auto& b : expect_list(exists_clause.items[1], "binder list").items) {
    const auto& bl = expect_list(b, "(name sort)");
    if (bl.items.size() != 2) syntax_error(b.line, b.col, "(name sort)");
    const std::string& name = expect_symbol(bl.items[0], "binder name");
    if (forbid_reserved && !name.empty() && name[0] == '%')
      syntax_error(bl.items[0].line, bl.items[0].col, "an identifier without the reserved % prefix");
    out.push_back(Var{name, parse_sort(bl.items[1])});
  }
  return out;
}

struct HeapClauses {
  const Sexp* exists = nullptr;
  const Sexp* pure = nullptr;
  const Sexp* spatial = nullptr;
};

HeapClauses split_heap_clauses(const Sexp& heap) {
  HeapClauses c;
  for (size_t i = 1; i < heap.items.size(); ++i) {
    const auto& clause = expect_list(heap.items[i], "(exists ...), (pure ...) or (spatial ...)");
    if (clause.items.empty())
      syntax_error(clause.line, clause.col, "(exists ...), (pure ...) or (spatial ...)");
    const std::string& tag = expect_symbol(clause.items[0], "exists, pure or spatial");
    if (tag == "exists" && !c.exists) {
      c.exists = &clause;
    } else if (tag == "pure" && !c.pure) {
      c.pure = &clause;
    } else if (tag == "spatial" && !c.spatial) {
      c.spatial = &clause;
    } else {
      syntax_error(clause.line, clause.col, "exists, pure or spatial (each at most once)");
    }
  }
  return c;
}

/// Deterministic fresh-name source; never returns a name already in use.
class FreshNames {
 public:
  void reserve(const std::string& name) { used_.insert(name); }

  Var fresh(const std::string& prefix, const std::string& base, Sort sort) {
    for (;;) {
      std::string name = "%" + prefix + std::to_string(counter_++) + "_" + base;
      if (used_.insert(name).second) return Var{name, sort};
    }
  }

 private:
  std::set<std::string> used_;
  int counter_ = 0;
};

void reserve_names(const SymbolicHeap& h, FreshNames& fresh) {
  for (const auto& v : free_vars(h)) fresh.reserve(v.name);
  for (const auto& b : h.exists) fresh.reserve(b.name);
}

/// Replaces left-hand-side existentials by fresh free variables.
SymbolicHeap skolemize(const SymbolicHeap& h, FreshNames& fresh) {
  Subst sk;
  for (const auto& b : h.exists) sk.bind(b, Term::of(fresh.fresh("sk", b.name, b.sort)));
  SymbolicHeap out;
  out.pure = sk(h.pure);
  out.spatial = sk(h.spatial);
  return out;
}

void replace_var_once(SpatialAtom& atom, const Var& from, const Var& to, bool& done);

/// Rewrites the heap so each binder occurs in at most one spatial position,
/// adding fresh binders and equalities.
SymbolicHeap split_rhs_binders(const SymbolicHeap& h, FreshNames& fresh) {
  SymbolicHeap out = h;
  std::vector<Var> extra;
  for (const auto& b : h.exists) {
    // occurrences are counted per variable position, not per atom
    size_t total = 0;
    auto occurrences_in = [&](const SpatialAtom& a) {
      size_t n = 0;
      std::function<void(const Term&)> walk_term = [&](const Term& t) {
        if (t.is_loc()) {
          if (t.loc().is_var() && t.loc().var() == b) ++n;
          return;
        }
        std::function<void(const DataTerm&)> walk = [&](const DataTerm& d) {
          switch (d.kind()) {
            case DataTerm::Kind::VarRef:
              if (d.var_ref() == b) ++n;
              break;
            case DataTerm::Kind::Neg:
            case DataTerm::Kind::Singleton: walk(d.child0()); break;
            case DataTerm::Kind::Add:
            case DataTerm::Kind::Union:
              walk(d.child0());
              walk(d.child1());
              break;
            default: break;
          }
        };
        walk(t.data());
      };
      if (const auto* p = std::get_if<PointsTo>(&a)) {
        walk_term(Term(p->root));
        for (const auto& [f, t] : p->cells) walk_term(t);
      } else {
        for (const auto& t : std::get<PredAtom>(a).args) walk_term(t);
      }
      return n;
    };
    for (const auto& a : out.spatial) total += occurrences_in(a);
    if (total < 2) continue;
    // Rename every spatial occurrence; the original binder survives in the
    // pure part, tied back by equalities.
    for (auto& atom : out.spatial) {
      while (occurrences_in(atom) > 0) {
        Var nv = fresh.fresh("q", b.name, b.sort);
        bool done = false;
        replace_var_once(atom, b, nv, done);
        extra.push_back(nv);
        if (b.sort == Sort::Mset)
          out.pure.add_data(DataAtom::mset_eq(DataTerm::var(b), DataTerm::var(nv)));
        else
          out.pure.add_data(DataAtom::int_cmp(CmpOp::Eq, DataTerm::var(b), DataTerm::var(nv)));
      }
    }
  }
  for (auto& v : extra) out.exists.push_back(std::move(v));
  return out;
}

void replace_var_once(SpatialAtom& atom, const Var& from, const Var& to, bool& done) {
  std::function<DataTerm(const DataTerm&)> rw = [&](const DataTerm& d) -> DataTerm {
    if (done) return d;
    switch (d.kind()) {
      case DataTerm::Kind::VarRef:
        if (d.var_ref() == from) {
          done = true;
          return DataTerm::var(to);
        }
        return d;
      case DataTerm::Kind::Neg: return DataTerm::neg(rw(d.child0()));
      case DataTerm::Kind::Singleton: return DataTerm::singleton(rw(d.child0()));
      case DataTerm::Kind::Add: {
        DataTerm a = rw(d.child0());
        return DataTerm::add(a, rw(d.child1()));
      }
      case DataTerm::Kind::Union: {
        DataTerm a = rw(d.child0());
        return DataTerm::mset_union(a, rw(d.child1()));
      }
      default: return d;
    }
  };
  auto rw_term = [&](Term& t) {
    if (done) return;
    if (t.is_loc()) {
      if (t.loc().is_var() && t.loc().var() == from) {
        t = Term(LocTerm::of(to));
        done = true;
      }
      return;
    }
    t = Term(rw(t.data()));
  };
  if (auto* p = std::get_if<PointsTo>(&atom)) {
    if (p->root.is_var() && p->root.var() == from && !done) {
      p->root = LocTerm::of(to);
      done = true;
    }
    for (auto& [f, t] : p->cells) rw_term(t);
  } else {
    for (auto& t : std::get<PredAtom>(atom).args) rw_term(t);
  }
}

}  // namespace

Problem parse_problem(const std::string& text) {
  Lexer lexer(text);
  std::vector<Sexp> forms = lexer.read_all();
  if (forms.empty()) syntax_error(1, 1, "at least one form");

  Problem problem;
  Builder builder(problem.field_decls, problem.defs);
  const Sexp* entail_form = nullptr;

  for (const auto& form : forms) {
    const auto& l = expect_list(form, "a top-level form");
    if (l.items.empty()) syntax_error(form.line, form.col, "a top-level form");
    const std::string& head = expect_symbol(l.items[0], "a form name");

    if (head == "declare-field") {
      if (l.items.size() != 3) syntax_error(form.line, form.col, "(declare-field name sort)");
      const std::string& name = expect_symbol(l.items[1], "a field name");
      Sort s = parse_sort(l.items[2]);
      if (s == Sort::Mset) sort_error(l.items[2], "fields hold Loc or Int values");
      if (problem.field_decls.count(name)) sort_error(l.items[1], "field " + name + " redeclared");
      problem.field_decls[name] = s;
    } else if (head == "define-pred") {
      if (l.items.size() < 4)
        syntax_error(form.line, form.col, "(define-pred name ((p sort)...) rule...)");
      InductiveDef def;
      def.name = expect_symbol(l.items[1], "a predicate name");
      if (def.name[0] == '%')
        syntax_error(l.items[1].line, l.items[1].col, "an identifier without the reserved % prefix");
      if (problem.defs.count(def.name)) sort_error(l.items[1], def.name + " redefined");
      for (const auto& p : expect_list(l.items[2], "parameter list").items) {
        const auto& pl = expect_list(p, "(name sort)");
        if (pl.items.size() != 2) syntax_error(p.line, p.col, "(name sort)");
        const std::string& pname = expect_symbol(pl.items[0], "parameter name");
        if (pname[0] == '%')
          syntax_error(pl.items[0].line, pl.items[0].col,
                       "an identifier without the reserved % prefix");
        def.params.push_back(Var{pname, parse_sort(pl.items[1])});
      }
      // Body predicates may be (mutually) recursive: register the signature
      // first, then parse the rules.
      problem.defs[def.name] = def;
      for (size_t i = 3; i < l.items.size(); ++i) {
        const auto& r = expect_list(l.items[i], "(rule ...)");
        if (r.items.size() != 4 || !r.items[0].is_sym("rule"))
          syntax_error(r.line, r.col, "(rule (exists ...) (pure ...) (spatial ...))");
        Rule rule;
        rule.head = def.name;
        rule.params = def.params;
        rule.exists = parse_binders(r.items[1], /*forbid_reserved=*/true);
        Scope scope;
        for (const auto& v : def.params) scope.vars[v.name] = v;
        for (const auto& v : rule.exists) {
          if (scope.vars.count(v.name))
            sort_error(r.items[1], "existential " + v.name + " shadows a parameter");
          scope.vars[v.name] = v;
        }
        const auto& pure = expect_list(r.items[2], "(pure ...)");
        if (pure.items.empty() || !pure.items[0].is_sym("pure"))
          syntax_error(pure.line, pure.col, "(pure ...)");
        for (size_t j = 1; j < pure.items.size(); ++j)
          builder.pure_atom(pure.items[j], scope, rule.pure);
        const auto& spatial = expect_list(r.items[3], "(spatial ...)");
        if (spatial.items.empty() || !spatial.items[0].is_sym("spatial"))
          syntax_error(spatial.line, spatial.col, "(spatial ...)");
        for (size_t j = 1; j < spatial.items.size(); ++j)
          builder.spatial_atom(spatial.items[j], scope, rule.spatial);
        problem.defs[def.name].rules.push_back(std::move(rule));
      }
    } else if (head == "roles") {
      if (l.items.size() != 4) syntax_error(form.line, form.col, "(roles name (source i j) (hole k l))");
      const std::string& name = expect_symbol(l.items[1], "a predicate name");
      auto dit = problem.defs.find(name);
      if (dit == problem.defs.end()) unknown_identifier(l.items[1], name);
      auto pair_of = [&](const Sexp& s, const char* tag) {
        const auto& pl = expect_list(s, tag);
        if (pl.items.size() != 3 || !pl.items[0].is_sym(tag) ||
            pl.items[1].kind != Sexp::Kind::Number || pl.items[2].kind != Sexp::Kind::Number)
          syntax_error(s.line, s.col, std::string("(") + tag + " i j)");
        return std::pair<int, int>{static_cast<int>(pl.items[1].num),
                                   static_cast<int>(pl.items[2].num)};
      };
      auto [sl, sd] = pair_of(l.items[2], "source");
      auto [hl, hd] = pair_of(l.items[3], "hole");
      const auto& params = dit->second.params;
      auto check = [&](int idx, Sort want, bool data) {
        if (idx < 0 || idx >= static_cast<int>(params.size()))
          sort_error(form, "role index out of range");
        if (data) {
          if (params[idx].sort == Sort::Loc) sort_error(form, "data role on a Loc parameter");
        } else if (params[idx].sort != want) {
          sort_error(form, "location role on a non-Loc parameter");
        }
      };
      check(sl, Sort::Loc, false);
      check(hl, Sort::Loc, false);
      check(sd, Sort::Int, true);
      check(hd, Sort::Int, true);
      std::set<int> seen{sl, sd, hl, hd};
      if (seen.size() != 4) sort_error(form, "role indices must be pairwise distinct");
      if (params[sd].sort != params[hd].sort)
        sort_error(form, "source and hole data parameters must share a sort");
      RoleAssignment roles;
      roles.source_loc = sl;
      roles.source_data = sd;
      roles.hole_loc = hl;
      roles.hole_data = hd;
      for (int i = 0; i < static_cast<int>(params.size()); ++i)
        if (!seen.count(i)) roles.statics.push_back(i);
      dit->second.declared_roles = roles;
    } else if (head == "set-option") {
      if (l.items.size() != 3) syntax_error(form.line, form.col, "(set-option name \"value\")");
      const std::string& key = expect_symbol(l.items[1], "an option name");
      if (l.items[2].kind == Sexp::Kind::String)
        problem.options[key] = l.items[2].text;
      else if (l.items[2].kind == Sexp::Kind::Symbol)
        problem.options[key] = l.items[2].text;
      else
        problem.options[key] = std::to_string(l.items[2].num);
    } else if (head == "check-entail") {
      if (entail_form) syntax_error(form.line, form.col, "a single check-entail form");
      entail_form = &form;
    } else {
      syntax_error(form.line, form.col, "declare-field, define-pred, roles, set-option or check-entail");
    }
  }

  if (entail_form) {
    const auto& l = entail_form->items;
    if (l.size() != 3) syntax_error(entail_form->line, entail_form->col, "(check-entail (lhs ...) (rhs ...))");
    const auto& lhs_form = expect_list(l[1], "(lhs heap...)");
    const auto& rhs_form = expect_list(l[2], "(rhs heap...)");
    if (lhs_form.items.empty() || !lhs_form.items[0].is_sym("lhs"))
      syntax_error(lhs_form.line, lhs_form.col, "(lhs heap...)");
    if (rhs_form.items.empty() || !rhs_form.items[0].is_sym("rhs"))
      syntax_error(rhs_form.line, rhs_form.col, "(rhs heap...)");
    if (lhs_form.items.size() < 2) syntax_error(lhs_form.line, lhs_form.col, "at least one heap");
    if (rhs_form.items.size() < 2) syntax_error(rhs_form.line, rhs_form.col, "at least one heap");

    std::vector<const Sexp*> heap_sexps;
    auto gather = [&](const Sexp& side) {
      for (size_t i = 1; i < side.items.size(); ++i) {
        const auto& h = expect_list(side.items[i], "(heap ...)");
        if (h.items.empty() || !h.items[0].is_sym("heap")) syntax_error(h.line, h.col, "(heap ...)");
        heap_sexps.push_back(&h);
      }
    };
    gather(lhs_form);
    gather(rhs_form);

    SortInference inference(problem.field_decls, problem.defs);
    std::map<std::string, Sort> inferred = inference.run(heap_sexps);

    FreshNames fresh;
    for (const auto& [name, sort] : inferred) fresh.reserve(name);

    auto build_heap = [&](const Sexp& h, bool is_rhs) {
      HeapClauses clauses = split_heap_clauses(h);
      SymbolicHeap heap;
      if (clauses.exists) heap.exists = parse_binders(*clauses.exists, /*forbid_reserved=*/false);
      Scope scope;
      scope.inferred = &inferred;
      for (const auto& b : heap.exists) {
        if (is_rhs && b.sort == Sort::Loc)
          throw FrontendError(FrontendError::Kind::RhsLocationBinder, h.line, h.col,
                              "location binder " + b.name + " on the right-hand side");
        scope.vars[b.name] = b;
      }
      if (clauses.pure)
        for (size_t i = 1; i < clauses.pure->items.size(); ++i)
          builder.pure_atom(clauses.pure->items[i], scope, heap.pure);
      if (clauses.spatial)
        for (size_t i = 1; i < clauses.spatial->items.size(); ++i)
          builder.spatial_atom(clauses.spatial->items[i], scope, heap.spatial);
      // every name this heap uses is reserved against fresh generation
      reserve_names(heap, fresh);
      return heap;
    };

    Query query;
    for (size_t i = 1; i < lhs_form.items.size(); ++i)
      query.lhs.disjuncts.push_back(build_heap(lhs_form.items[i], false));
    for (size_t i = 1; i < rhs_form.items.size(); ++i)
      query.rhs.disjuncts.push_back(build_heap(rhs_form.items[i], true));
    for (auto& d : query.lhs.disjuncts) d = skolemize(d, fresh);
    for (auto& d : query.rhs.disjuncts) d = split_rhs_binders(d, fresh);
    problem.query = std::move(query);
  }

  return problem;
}

}  // namespace slent
