#pragma once

#include <iosfwd>

namespace mllkm {

/// Entry point behind the `mllkm` executable. Subcommands: train, predict,
/// bench, synth. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mllkm
