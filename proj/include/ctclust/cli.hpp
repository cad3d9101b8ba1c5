#pragma once

#include "ctclust/error.hpp"

namespace ctclust {

/// 2 for configuration errors, 3 for data errors, 4 for everything else.
int exit_code_for(ErrorKind kind);

/// Entry point of the `ctclust` executable (simulate / fit / summarize).
int run_cli(int argc, char** argv);

}  // namespace ctclust
