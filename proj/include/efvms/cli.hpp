#pragma once

#include <iosfwd>

namespace efvms {

/// Subcommands mesh, fom, pod, rom, diag and export. Returns 0 on success,
/// 1 on usage errors and 2 on runtime failures.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace efvms
