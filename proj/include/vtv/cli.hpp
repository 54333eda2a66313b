#pragma once

// Command-line pipeline. Settings come from a JSON config file, then
// VTV_-prefixed environment variables, then flags (later sources win).

#include <iosfwd>
#include <string>
#include <vector>

namespace vtv::cli {

// `args` excludes the program name. Errors are written to `err` as one JSON
// record {"kind", "message"}; the return value is the process exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vtv::cli
