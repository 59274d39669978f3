#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "slent/problem.hpp"

namespace slent::test {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SlentError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string fixture_path(const std::string& rel) {
  return std::string(SLENT_FIXTURE_DIR) + "/" + rel;
}

inline Problem load_fixture(const std::string& rel) {
  return parse_problem(read_file(fixture_path(rel)));
}

inline Var loc(const std::string& n) { return Var{n, Sort::Loc}; }
inline Var iv(const std::string& n) { return Var{n, Sort::Int}; }
inline Var mv(const std::string& n) { return Var{n, Sort::Mset}; }

}  // namespace slent::test
