// Command-line front end. `run_cli` is the whole program minus process
// plumbing, so tests can drive it in-process.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lfa::cli {

/// Exit codes: 0 success, 1 module error (name printed as JSON on `err`),
/// 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Default location of the shipped presets file.
std::string default_presets_path();

}  // namespace lfa::cli
