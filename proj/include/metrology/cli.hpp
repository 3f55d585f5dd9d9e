#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace metrology {

// Exit codes: 0 success, 1 usage or validation error, 2 computation failure.
// Relative paths resolve against $METROLOGY_WORKDIR when it is set.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace metrology
