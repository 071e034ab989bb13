#pragma once

#include <string>
#include <vector>

namespace styleguide {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDiverged = 3;

// Subcommands: train, sample, sweep, ablate, two-step, diversity.
int cli_main(int argc, const char* const* argv);
int cli_main(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace styleguide
