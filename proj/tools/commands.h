// SPDX-License-Identifier: Apache-2.0

#ifndef SKINFIT_TOOLS_COMMANDS_H
#define SKINFIT_TOOLS_COMMANDS_H

namespace skinfit::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,  // unexpected error
    kExitConfig = 2,
    kExitData = 3,
    kExitNumerical = 4,  // includes a failed gradient check
};

// Parses the command line, runs the subcommand, and maps errors to exit
// codes. Never throws.
int run_cli(int argc, const char *const *argv);

}  // namespace skinfit::cli

#endif  // SKINFIT_TOOLS_COMMANDS_H
