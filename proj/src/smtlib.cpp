#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <functional>
#include <sstream>

#include "slent/data_solver.hpp"

namespace slent {

namespace {

std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_')
      out += c;
    else
      out += '_';
  }
  return out;
}

struct Encoder {
  int round;
  std::map<Var, std::string> symbols;
  std::vector<Var> ints, msets;
  std::vector<DataTerm> probe_terms;  // integer terms the membership predicates see

  std::string sym(const Var& v, const char* prefix) {
    return "q" + std::to_string(round) + "_" + prefix + "_" + sanitize(v.name);
  }

  std::string int_term(const DataTerm& t) {
    switch (t.kind()) {
      case DataTerm::Kind::VarRef: return sym(t.var_ref(), "i");
      case DataTerm::Kind::IntLit: {
        long long v = t.value();
        if (v < 0) return "(- " + std::to_string(-v) + ")";
        return std::to_string(v);
      }
      case DataTerm::Kind::Add: return "(+ " + int_term(t.child0()) + " " + int_term(t.child1()) + ")";
      case DataTerm::Kind::Neg: return "(- " + int_term(t.child0()) + ")";
      default: throw SlentError("not an integer term");
    }
  }

  struct Flat {
    std::vector<DataTerm> elems;
    std::vector<Var> sets;
  };

  Flat flat(const DataTerm& t) {
    Flat f;
    std::function<void(const DataTerm&)> walk = [&](const DataTerm& u) {
      switch (u.kind()) {
        case DataTerm::Kind::EmptySet: return;
        case DataTerm::Kind::Singleton: f.elems.push_back(u.child0()); return;
        case DataTerm::Kind::VarRef: f.sets.push_back(u.var_ref()); return;
        case DataTerm::Kind::Union:
          walk(u.child0());
          walk(u.child1());
          return;
        default: throw SlentError("not a multiset term");
      }
    };
    walk(t);
    return f;
  }

  std::string empty_of(const Flat& f) {
    if (!f.elems.empty()) return "false";
    if (f.sets.empty()) return "true";
    if (f.sets.size() == 1) return sym(f.sets[0], "e");
    std::string s = "(and";
    for (const auto& m : f.sets) s += " " + sym(m, "e");
    return s + ")";
  }

  std::string member_of(const Flat& f, const std::string& w) {
    std::vector<std::string> parts;
    for (const auto& e : f.elems) parts.push_back("(= " + w + " " + int_term(e) + ")");
    for (const auto& m : f.sets)
      parts.push_back("(and (not " + sym(m, "e") + ") (" + sym(m, "mem") + " " + w + "))");
    if (parts.empty()) return "false";
    if (parts.size() == 1) return parts[0];
    std::string s = "(or";
    for (const auto& p : parts) s += " " + p;
    return s + ")";
  }

  std::string cmp(CmpOp op, const std::string& a, const std::string& b) {
    switch (op) {
      case CmpOp::Eq: return "(= " + a + " " + b + ")";
      case CmpOp::Ne: return "(not (= " + a + " " + b + "))";
      case CmpOp::Lt: return "(< " + a + " " + b + ")";
      case CmpOp::Le: return "(<= " + a + " " + b + ")";
    }
    return "false";
  }

  // e op every element of the component
  std::string elem_vs_set(CmpOp op, const std::string& e, const Var& m) {
    return "(or " + sym(m, "e") + " " + cmp(op, e, sym(m, "lo")) + ")";
  }
  std::string set_vs_elem(CmpOp op, const Var& m, const std::string& e) {
    return "(or " + sym(m, "e") + " " + cmp(op, sym(m, "hi"), e) + ")";
  }
  std::string set_vs_set(CmpOp op, const Var& a, const Var& b) {
    return "(or " + sym(a, "e") + " " + sym(b, "e") + " " +
           cmp(op, sym(a, "hi"), sym(b, "lo")) + ")";
  }

  std::string atom(const DataAtom& a, bool hypothesis) {
    switch (a.kind) {
      case DataAtom::Kind::IntCmp: return cmp(a.op, int_term(a.lhs), int_term(a.rhs));
      case DataAtom::Kind::Member: {
        Flat f = flat(a.rhs);
        return member_of(f, int_term(a.lhs));
      }
      case DataAtom::Kind::MsetEq: {
        if (!hypothesis)
          throw SlentError("multiset equality goals are not sent to the backend");
        // weak but sound for a hypothesis: emptiness agreement plus
        // membership agreement at the probe terms
        Flat l = flat(a.lhs), r = flat(a.rhs);
        std::string s = "(and (= " + empty_of(l) + " " + empty_of(r) + ")";
        for (const auto& w : probe_terms) {
          std::string ws = int_term(w);
          s += " (= " + member_of(l, ws) + " " + member_of(r, ws) + ")";
        }
        return s + ")";
      }
      case DataAtom::Kind::AllCmp: {
        Flat l, r;
        if (a.lhs.sort() == Sort::Mset)
          l = flat(a.lhs);
        else
          l.elems.push_back(a.lhs);
        if (a.rhs.sort() == Sort::Mset)
          r = flat(a.rhs);
        else
          r.elems.push_back(a.rhs);
        std::vector<std::string> parts;
        for (const auto& le : l.elems) {
          for (const auto& re : r.elems) parts.push_back(cmp(a.op, int_term(le), int_term(re)));
          for (const auto& rs : r.sets) parts.push_back(elem_vs_set(a.op, int_term(le), rs));
        }
        for (const auto& ls : l.sets) {
          for (const auto& re : r.elems) parts.push_back(set_vs_elem(a.op, ls, int_term(re)));
          for (const auto& rs : r.sets) parts.push_back(set_vs_set(a.op, ls, rs));
        }
        if (parts.empty()) return "true";
        if (parts.size() == 1) return parts[0];
        std::string s = "(and";
        for (const auto& p : parts) s += " " + p;
        return s + ")";
      }
    }
    return "true";
  }
};

}  // namespace

EncodedQuery encode_smtlib(const DataQuery& q, int round) {
  Encoder enc;
  enc.round = round;

  std::set<Var> vars;
  auto note_atom = [&](const DataAtom& a) {
    for (const auto& v : free_vars(a)) vars.insert(v);
  };
  for (const auto& a : q.hypotheses) note_atom(a);
  for (const auto& a : q.goal) note_atom(a);
  for (const auto& v : vars) {
    if (v.sort == Sort::Mset)
      enc.msets.push_back(v);
    else
      enc.ints.push_back(v);
  }

  // probe terms: every integer term appearing as an element or comparison side
  std::set<std::string> seen_probe;
  auto probe = [&](const DataTerm& t) {
    if (t.sort() != Sort::Int) return;
    if (seen_probe.insert(show(t)).second) enc.probe_terms.push_back(t);
  };
  auto probe_atom = [&](const DataAtom& a) {
    if (a.kind == DataAtom::Kind::IntCmp) {
      probe(a.lhs);
      probe(a.rhs);
    } else if (a.kind == DataAtom::Kind::Member) {
      probe(a.lhs);
    }
    auto probe_mset = [&](const DataTerm& t) {
      if (t.sort() != Sort::Mset) {
        probe(t);
        return;
      }
      std::function<void(const DataTerm&)> walk = [&](const DataTerm& u) {
        switch (u.kind()) {
          case DataTerm::Kind::Singleton: probe(u.child0()); return;
          case DataTerm::Kind::Union:
            walk(u.child0());
            walk(u.child1());
            return;
          default: return;
        }
      };
      walk(t);
    };
    probe_mset(a.lhs);
    probe_mset(a.rhs);
  };
  for (const auto& a : q.hypotheses) probe_atom(a);
  for (const auto& a : q.goal) probe_atom(a);

  std::ostringstream out;
  out << "(set-logic QF_UFLIA)\n";
  for (const auto& v : enc.ints) {
    std::string s = enc.sym(v, "i");
    enc.symbols[v] = s;
    out << "(declare-fun " << s << " () Int)\n";
  }
  for (const auto& v : enc.msets) {
    enc.symbols[v] = enc.sym(v, "mem");
    out << "(declare-fun " << enc.sym(v, "e") << " () Bool)\n";
    out << "(declare-fun " << enc.sym(v, "lo") << " () Int)\n";
    out << "(declare-fun " << enc.sym(v, "hi") << " () Int)\n";
    out << "(declare-fun " << enc.sym(v, "mem") << " (Int) Bool)\n";
    out << "(assert (=> (not " << enc.sym(v, "e") << ") (<= " << enc.sym(v, "lo") << " "
        << enc.sym(v, "hi") << ")))\n";
    for (const auto& w : enc.probe_terms) {
      std::string ws = enc.int_term(w);
      out << "(assert (=> (" << enc.sym(v, "mem") << " " << ws << ") (and (not "
          << enc.sym(v, "e") << ") (<= " << enc.sym(v, "lo") << " " << ws << ") (<= " << ws
          << " " << enc.sym(v, "hi") << "))))\n";
    }
  }
  for (const auto& a : q.hypotheses) out << "(assert " << enc.atom(a, true) << ")\n";
  if (!q.goal.empty()) {
    std::string g;
    if (q.goal.size() == 1) {
      g = enc.atom(q.goal[0], false);
    } else {
      g = "(and";
      for (const auto& a : q.goal) g += " " + enc.atom(a, false);
      g += ")";
    }
    out << "(assert (not " << g << "))\n";
  }
  out << "(check-sat)\n";
  return EncodedQuery{out.str(), enc.symbols};
}

std::string run_smt_process(const std::string& command, const std::string& script,
                            int timeout_ms) {
  int to_child[2], from_child[2];
  if (pipe(to_child) != 0) return "";
  if (pipe(from_child) != 0) {
    close(to_child[0]);
    close(to_child[1]);
    return "";
  }
  pid_t pid = fork();
  if (pid < 0) {
    close(to_child[0]);
    close(to_child[1]);
    close(from_child[0]);
    close(from_child[1]);
    return "";
  }
  if (pid == 0) {
    dup2(to_child[0], STDIN_FILENO);
    dup2(from_child[1], STDOUT_FILENO);
    close(to_child[0]);
    close(to_child[1]);
    close(from_child[0]);
    close(from_child[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(to_child[0]);
  close(from_child[1]);

  // feed the script, then close stdin so the child sees EOF
  size_t written = 0;
  while (written < script.size()) {
    ssize_t n = write(to_child[1], script.data() + written, script.size() - written);
    if (n <= 0) break;
    written += static_cast<size_t>(n);
  }
  close(to_child[1]);

  std::string output;
  auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  bool timed_out = false;
  for (;;) {
    auto now = std::chrono::steady_clock::now();
    int remain = static_cast<int>(
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count());
    if (remain <= 0) {
      timed_out = true;
      break;
    }
    struct pollfd pfd = {from_child[0], POLLIN, 0};
    int pr = poll(&pfd, 1, remain);
    if (pr <= 0) {
      timed_out = true;
      break;
    }
    char buf[4096];
    ssize_t n = read(from_child[0], buf, sizeof buf);
    if (n <= 0) break;  // EOF
    output.append(buf, static_cast<size_t>(n));
  }
  close(from_child[0]);
  if (timed_out) kill(pid, SIGKILL);
  int status = 0;
  waitpid(pid, &status, 0);
  if (timed_out) return "";

  // last sat/unsat/unknown token wins
  std::istringstream lines(output);
  std::string line, verdict;
  while (std::getline(lines, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line == "sat" || line == "unsat" || line == "unknown") verdict = line;
  }
  return verdict;
}

}  // namespace slent
