#pragma once

namespace srpo {

// Subcommand dispatch for the srpo tool. Returns the process exit status:
// 0 success, 2 config/usage, 3 data, 4 numeric, 5 I/O.
int dispatch(int argc, const char* const* argv);

}  // namespace srpo
