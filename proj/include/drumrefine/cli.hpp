#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace drumrefine {

// Entry point behind the binary's main(). Exit codes: 0 success, 1 data
// error, 2 usage or config error.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

} // namespace drumrefine
