#pragma once

#include <iosfwd>

namespace rltmle {

/// Entry point of the command-line tool. Subcommands:
///   run <config.json>      run a sweep, write results JSONL
///   report <results>       write <prefix>.csv and <prefix>.json
///   envs                   list environment names
///   estimate               run estimators on a dataset file
///   simulate               write logged trajectories as JSONL
///   export-env <name>      dump an environment as JSON
/// Returns 0 on success, 2 on usage or configuration errors, 1 otherwise.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rltmle
