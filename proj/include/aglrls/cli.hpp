#pragma once

// Command-line front end: gen-data, train, eval, simulate-fplg, stats, ablation.
// Exit codes: 0 ok, 1 runtime error, 2 usage error.

#include <ostream>
#include <string>
#include <vector>

namespace aglrls {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace aglrls
