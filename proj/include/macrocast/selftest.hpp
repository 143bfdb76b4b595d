#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace macrocast {

enum class CriterionStatus { pass, fail, skip, report };

struct CriterionResult {
  std::string name;
  CriterionStatus status = CriterionStatus::fail;
  std::string detail;
  double seconds = 0.0;
};

struct SelftestOptions {
  std::uint64_t seed = 20240917;
  std::optional<std::string> reference_csv;  // published-vintage data for the report-only check
  std::filesystem::path scratch_dir;         // CLI runs write here; empty: a fresh temp directory
};

/// Runs every acceptance criterion in order; `on_result` sees each as it finishes.
std::vector<CriterionResult> run_selftest(const SelftestOptions& options,
                                          const std::function<void(const CriterionResult&)>& on_result = {});

/// "PASS  name (1.23 s): detail"
std::string format_result(const CriterionResult& r);

/// True unless some criterion failed; skipped and report-only lines never fail.
bool all_passed(const std::vector<CriterionResult>& results);

}  // namespace macrocast
