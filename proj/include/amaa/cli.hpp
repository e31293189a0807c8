#pragma once

// Command-line front end. Subcommands: gen-scenes, train, eval, ablate,
// sweep-alpha, gradcheck, export-plots. Global flags: --config, --seed, --out
// (default $AMAA_OUT, else ./amaa_out) and --print-default-config.
//
// Exit codes: 0 success, 1 validation error (bad flags, bad config, missing
// inputs), 2 runtime error. Diagnostics go to `err`; `out` gets one summary
// line per command.

#include <ostream>
#include <string>
#include <vector>

namespace amaa {

inline constexpr const char* kToolVersion = "0.1.0";

/// `args` excludes the program name.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_dispatch(int argc, const char* const* argv);

}  // namespace amaa
