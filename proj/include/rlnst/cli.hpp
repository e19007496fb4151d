#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace rlnst {

// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,  // gradient checks failed, or an internal error
  kExitBadInput = 2,     // bad paths, configuration, images or checkpoints
  kExitDiverged = 3,     // training produced a non-finite loss
};

// Entry point of `rlnst <train|stylize|video-stylize|eval|gradcheck> ...`.
// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Worker threads for per-image fan-out: RLNST_THREADS if set, else the
// hardware concurrency. Throws ConfigError for a malformed value.
unsigned worker_threads();

}  // namespace rlnst
