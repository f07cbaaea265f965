#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace citenav::cli {

/// Runs one `citenav` invocation; `args` excludes the program name.
/// Returns the process exit status.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace citenav::cli
