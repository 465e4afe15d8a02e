#pragma once

namespace crel {

// Entry point for the command-line tool.  Exit codes: 0 success,
// 2 infeasibility (hull), 3 sampler failure, 64 usage or parse error.
int run_cli(int argc, char** argv);

}  // namespace crel
