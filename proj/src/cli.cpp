#include "slent/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "slent/prover.hpp"

namespace slent {

namespace {

struct Options {
  std::string solver_cmd;
  double timeout = 10.0;
  bool trace = false;
  bool emit_lemmas = false;
  std::string oracle_bound;
  int jobs = 1;
  bool json = false;
};

struct FileReport {
  std::string file;
  std::string verdict = "ERROR";
  long long wall_ms = 0;
  LemmaCounters counters;
  long data_checks = 0;
  std::string diagnosis;
  std::string detail;  // trace / lemma listing / countermodel
  int exit_contrib = 3;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SlentError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Bounds bounds_from(const Options& opt, std::ostream& err, bool& ok) {
  ok = true;
  if (opt.oracle_bound.empty()) return Bounds{};
  auto b = parse_bounds(opt.oracle_bound);
  if (!b) {
    err << "invalid --oracle-bound, expected cells=4,locs=5,data=0..2,mult=4\n";
    ok = false;
    return Bounds{};
  }
  return *b;
}

bool wellformed_or_report(const Problem& problem, const std::string& file, std::ostream& err) {
  bool ok = true;
  for (const auto& [name, def] : problem.defs) {
    WellformednessReport report = check_wellformed(def, problem.defs);
    for (const auto& v : report.violations) {
      err << file << ": " << name << " rule " << v.rule_index << ": ["
          << wf_clause_name(v.clause) << "] " << v.message << "\n";
      ok = false;
    }
  }
  return ok;
}

FileReport run_check(const std::string& file, const Options& opt, const Bounds& bounds) {
  FileReport report;
  report.file = file;
  auto t0 = std::chrono::steady_clock::now();
  try {
    Problem problem = parse_problem(read_file(file));
    std::ostringstream errbuf;
    if (!wellformed_or_report(problem, file, errbuf)) {
      report.diagnosis = "ill-formed definitions";
      report.detail = errbuf.str();
      return report;
    }
    if (!problem.query) {
      report.diagnosis = "no check-entail form";
      return report;
    }
    DataSolver solver;
    if (!opt.solver_cmd.empty()) solver.set_backend(opt.solver_cmd);
    LemmaSet lemmas = generate_all_lemmas(problem.defs, solver);
    Oracle oracle(problem.defs, bounds);
    ProverConfig config;
    config.timeout_seconds = opt.timeout;
    Verdict verdict = prove(problem, lemmas, solver, &oracle, config);
    report.verdict = verdict_name(verdict.kind);
    report.counters = verdict.counters;
    report.data_checks = verdict.data_checks;
    report.diagnosis = verdict.diagnosis;
    switch (verdict.kind) {
      case Verdict::Kind::Valid: report.exit_contrib = 0; break;
      case Verdict::Kind::Invalid: report.exit_contrib = 1; break;
      case Verdict::Kind::Unknown: report.exit_contrib = 2; break;
    }
    if (opt.trace) {
      std::ostringstream d;
      for (const auto& p : verdict.proofs) {
        d << "; disjunct " << p.lhs_index << " => " << p.rhs_index;
        if (p.vacuous) d << " (unsat lhs)";
        d << "\n" << p.trace.to_string();
        if (!p.witness.empty()) d << "witness: " << show(p.witness) << "\n";
      }
      if (verdict.countermodel) d << print_model(*verdict.countermodel);
      report.detail = d.str();
    }
  } catch (const FrontendError& e) {
    report.diagnosis = std::string("parse error: ") + e.what();
  } catch (const SlentError& e) {
    report.diagnosis = e.what();
  }
  auto t1 = std::chrono::steady_clock::now();
  report.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
  return report;
}

int cmd_check(const std::vector<std::string>& files, const Options& opt, std::ostream& out,
              std::ostream& err) {
  bool bounds_ok = true;
  Bounds bounds = bounds_from(opt, err, bounds_ok);
  if (!bounds_ok) return 3;
  int exit_code = 0;
  std::vector<FileReport> reports(files.size());
  if (opt.jobs <= 1 || files.size() <= 1) {
    for (size_t i = 0; i < files.size(); ++i) reports[i] = run_check(files[i], opt, bounds);
  } else {
    std::atomic<size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= files.size()) break;
        reports[i] = run_check(files[i], opt, bounds);
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < opt.jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& r : reports) {
    out << r.file << ": " << r.verdict;
    if (!r.diagnosis.empty()) out << " (" << r.diagnosis << ")";
    out << "\n";
    if (!r.detail.empty()) out << r.detail;
    if (r.exit_contrib == 3) {
      exit_code = 3;
    } else if (exit_code != 3) {
      exit_code = std::max(exit_code, r.exit_contrib);
    }
  }
  return exit_code;
}

int cmd_lemmas(const std::string& file, const Options& opt, std::ostream& out, std::ostream& err) {
  try {
    Problem problem = parse_problem(read_file(file));
    if (!wellformed_or_report(problem, file, err)) return 3;
    DataSolver solver;
    if (!opt.solver_cmd.empty()) solver.set_backend(opt.solver_cmd);
    LemmaSet lemmas = generate_all_lemmas(problem.defs, solver);
    for (const auto& l : lemmas.lemmas) out << print_lemma(l) << "\n";
    return 0;
  } catch (const SlentError& e) {
    err << file << ": " << e.what() << "\n";
    return 3;
  }
}

int cmd_wf(const std::string& file, std::ostream& out, std::ostream& err) {
  try {
    Problem problem = parse_problem(read_file(file));
    bool all_ok = true;
    for (const auto& [name, def] : problem.defs) {
      WellformednessReport report = check_wellformed(def, problem.defs);
      if (report.ok()) {
        out << name << ": well-formed";
      } else {
        all_ok = false;
        out << name << ": ill-formed";
        for (const auto& v : report.violations)
          out << "\n  rule " << v.rule_index << ": [" << wf_clause_name(v.clause) << "] "
              << v.message;
      }
      CompReport comp = classify_compositional(def);
      if (comp.ok) {
        const auto& r = *comp.roles;
        out << "; compositional (source " << r.source_loc << " " << r.source_data << ", hole "
            << r.hole_loc << " " << r.hole_data << ")";
      } else {
        out << "; not compositional";
        for (const auto& v : comp.violations) {
          out << " [" << v.clause;
          if (v.rule_index != static_cast<size_t>(-1)) out << " rule " << v.rule_index;
          out << "]";
        }
      }
      out << "\n";
    }
    return all_ok ? 0 : 2;
  } catch (const SlentError& e) {
    err << file << ": " << e.what() << "\n";
    return 3;
  }
}

int cmd_oracle(const std::string& file, const Options& opt, std::ostream& out, std::ostream& err) {
  bool bounds_ok = true;
  Bounds bounds = bounds_from(opt, err, bounds_ok);
  if (!bounds_ok) return 3;
  try {
    Problem problem = parse_problem(read_file(file));
    if (!problem.query) {
      err << file << ": no check-entail form\n";
      return 3;
    }
    Oracle oracle(problem.defs, bounds);
    auto counter = oracle.refute_entailment(problem.query->lhs, problem.query->rhs);
    if (counter) {
      out << file << ": countermodel found\n" << print_model(*counter);
      return 1;
    }
    out << file << ": no countermodel up to " << bounds.to_string() << "\n";
    return 0;
  } catch (const SlentError& e) {
    err << file << ": " << e.what() << "\n";
    return 3;
  }
}

int cmd_bench(const std::string& dir, const Options& opt, std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  std::error_code ec;
  for (const auto& entry : fs::recursive_directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".slent")
      files.push_back(entry.path().string());
  }
  if (ec) {
    err << "cannot read directory " << dir << "\n";
    return 3;
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    err << "no .slent files under " << dir << "\n";
    return 3;
  }
  bool bounds_ok = true;
  Bounds bounds = bounds_from(opt, err, bounds_ok);
  if (!bounds_ok) return 3;

  std::vector<FileReport> reports(files.size());
  if (opt.jobs <= 1) {
    for (size_t i = 0; i < files.size(); ++i) reports[i] = run_check(files[i], opt, bounds);
  } else {
    std::atomic<size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= files.size()) break;
        reports[i] = run_check(files[i], opt, bounds);
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < opt.jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  int exit_code = 0;
  if (opt.json) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : reports) {
      arr.push_back({{"file", r.file},
                     {"verdict", r.verdict},
                     {"wall_ms", r.wall_ms},
                     {"lemma", {{"b", r.counters.base},
                                {"r", r.counters.inductive},
                                {"p", r.counters.syntactic},
                                {"c", r.counters.composition},
                                {"d", r.counters.derived}}},
                     {"data_entailments", r.data_checks},
                     {"diagnosis", r.diagnosis}});
    }
    out << arr.dump(2) << "\n";
  } else {
    out << "file\tverdict\twall_ms\tb\tr\tp\tc\td\tdata\tdiagnosis\n";
    for (const auto& r : reports) {
      out << r.file << "\t" << r.verdict << "\t" << r.wall_ms << "\t" << r.counters.base << "\t"
          << r.counters.inductive << "\t" << r.counters.syntactic << "\t"
          << r.counters.composition << "\t" << r.counters.derived << "\t" << r.data_checks << "\t"
          << r.diagnosis << "\n";
    }
  }
  for (const auto& r : reports) {
    if (r.exit_contrib == 3)
      exit_code = 3;
    else if (exit_code != 3)
      exit_code = std::max(exit_code, r.exit_contrib);
  }
  return exit_code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"entailment checker for separation-logic symbolic heaps"};
  app.require_subcommand(1);
  app.fallthrough();

  Options opt;
  if (const char* env = std::getenv("SLENT_SOLVER")) opt.solver_cmd = env;

  app.add_option("--solver", opt.solver_cmd, "external SMT-LIB 2 process command");
  app.add_option("--timeout", opt.timeout, "per-query timeout in seconds");
  app.add_flag("--trace", opt.trace, "print proof traces");
  app.add_option("--oracle-bound", opt.oracle_bound, "cells=4,locs=5,data=0..2,mult=4");
  app.add_option("--jobs", opt.jobs, "parallel files");
  app.add_flag("--json", opt.json, "JSON report (bench)");

  std::vector<std::string> check_files;
  auto* check = app.add_subcommand("check", "prove the entailment of each file");
  check->fallthrough();
  check->add_option("files", check_files, "problem files")->required();

  std::string lemmas_file;
  auto* lemmas = app.add_subcommand("lemmas", "print the synthesized lemma set");
  lemmas->fallthrough();
  lemmas->add_option("file", lemmas_file, "problem file")->required();

  std::string wf_file;
  auto* wf = app.add_subcommand("wf", "well-formedness and compositionality report");
  wf->fallthrough();
  wf->add_option("file", wf_file, "problem file")->required();

  std::string oracle_file;
  auto* oracle = app.add_subcommand("oracle", "bounded refutation only");
  oracle->fallthrough();
  oracle->add_option("file", oracle_file, "problem file")->required();

  std::string bench_dir;
  auto* bench = app.add_subcommand("bench", "batch report over a directory");
  bench->fallthrough();
  bench->add_option("dir", bench_dir, "directory of .slent files")->required();

  std::vector<char*> argv;
  std::vector<std::string> storage = args;
  std::string prog = "slent";
  argv.push_back(prog.data());
  for (auto& a : storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << e.what() << "\n";
    return 3;
  }

  if (check->parsed()) return cmd_check(check_files, opt, out, err);
  if (lemmas->parsed()) return cmd_lemmas(lemmas_file, opt, out, err);
  if (wf->parsed()) return cmd_wf(wf_file, out, err);
  if (oracle->parsed()) return cmd_oracle(oracle_file, opt, out, err);
  if (bench->parsed()) return cmd_bench(bench_dir, opt, out, err);
  err << "no subcommand\n";
  return 3;
}

}  // namespace slent
