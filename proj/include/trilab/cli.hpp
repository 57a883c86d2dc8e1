#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace trilab {

// Exit codes: 0 all checks pass, 1 a verdict failed, 2 malformed input.
// Reports go to `out`; diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace trilab
