#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace slent {

/// Command-line driver: check / lemmas / wf / oracle / bench.
/// Exit codes: 0 all valid, 1 some invalid, 2 some unknown, 3 usage or
/// input errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace slent
