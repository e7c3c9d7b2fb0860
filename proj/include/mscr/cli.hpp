#pragma once

namespace mscr::cli {

/// Exit codes: 0 success, 1 runtime module error, 2 configuration or usage error.
int run(int argc, char** argv);

}  // namespace mscr::cli
