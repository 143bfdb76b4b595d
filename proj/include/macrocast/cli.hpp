#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace macrocast {

namespace exit_code {
constexpr int ok = 0;
constexpr int failure_budget = 1;  // backtest: a model exceeded the failure budget; selftest: a criterion failed
constexpr int invalid_input = 2;   // usage, config or data validation error
constexpr int adapter_startup = 3;
constexpr int plan_validation = 4;
}  // namespace exit_code

/// Entry point of the `macrocast` tool; `args` excludes the program name.
/// Human-readable text goes to `out`/`err`, machine artifacts only to files.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace macrocast
