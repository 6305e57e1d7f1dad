#pragma once

namespace bregalt {

// Full command-line driver: parses argv, dispatches to the subcommands
// (run, rate, diag, sweep, list-generators, list-fixtures) and maps errors
// to exit codes: 0 clean, 1 configuration / too-short input, 2 domain
// violation, 3 solver failure.
int cli_main(int argc, char** argv);

}  // namespace bregalt
