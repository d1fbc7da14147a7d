#pragma once

namespace nullspace {

/// Command-line front end: `solve`, `laplacian`, and `analyze` subcommands.
/// Exit codes: 0 success, 1 parse/usage error, 2 dimension or shape error,
/// 3 non-convergence (summary still printed).
int run_cli(int argc, const char* const* argv);

}  // namespace nullspace
