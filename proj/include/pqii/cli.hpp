#pragma once

#include <string>
#include <vector>

namespace pqii::cli {

// Entry point behind the pqii binary: gen | fit | encode | build | query |
// bench | report. Returns the process exit code; every error goes to stderr
// with the prefix "error:".
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace pqii::cli
