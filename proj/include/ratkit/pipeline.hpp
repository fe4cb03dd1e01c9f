#pragma once

// Subcommand implementations behind the `ratkit` CLI. Each command loads its inputs,
// runs the analysis and returns the files it would write; nothing touches disk until
// the caller writes the bundle, so a failing command leaves no partial reports.

#include "ratkit/config.hpp"
#include "ratkit/report.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ratkit {

namespace fs = std::filesystem;

struct CommandResult {
  OutputBundle files;
  ojson report;          // primary report document
  std::string summary;   // short human-readable digest for stdout
  bool checks_passed = true;
};

struct SourceSubset {
  std::string name;
  std::vector<std::string> sources;  // empty = every source of the generator
};

struct DiversityArgs {
  fs::path rationales;
  std::vector<std::string> backends;  // empty = every backend in the file
  std::string generator;              // empty = every generator
  std::vector<SourceSubset> subsets;  // empty = {"all"}
  std::optional<fs::path> per_input;
  std::optional<fs::path> summary;
};

struct PermanovaArgs {
  fs::path rationales;
  std::vector<std::string> backends;
  std::string generator;
};

struct BudgetArgs {
  fs::path rationales;
  std::vector<std::string> backends;
  std::string generator;
  bool greedy = false;
};

struct MetricsArgs {
  fs::path predictions;
  std::vector<std::string> group_by{"model_id", "setup_id"};
};

struct AgreementArgs {
  fs::path judgments;
  std::string method = "fleiss";      // fleiss | cohen
  std::vector<std::string> raters;    // cohen: reference rater first
};

struct FaithfulnessArgs {
  fs::path judgments;
  fs::path predictions;
  std::optional<fs::path> out;
};

struct AlignArgs {
  fs::path preferences;
  fs::path faithfulness;
  std::optional<fs::path> family_map;
  bool majority = false;
};

struct TheoryArgs {
  std::string which = "all";  // coverage | ridge | variance | all
  std::optional<std::size_t> trials;
};

struct ReportArgs {
  std::optional<fs::path> annotations, rationales, predictions, judgments, preferences, family_map;
  std::vector<std::string> backends;
  bool theory = true;
};

CommandResult run_reconstruct(const RunConfig& config, const fs::path& annotations);
CommandResult run_diversity(const RunConfig& config, const DiversityArgs& args);
CommandResult run_permanova(const RunConfig& config, const PermanovaArgs& args);
CommandResult run_coverage_budget(const RunConfig& config, const BudgetArgs& args);
CommandResult run_metrics(const RunConfig& config, const MetricsArgs& args);
CommandResult run_agreement(const RunConfig& config, const AgreementArgs& args);
CommandResult run_faithfulness(const RunConfig& config, const FaithfulnessArgs& args);
CommandResult run_align(const RunConfig& config, const AlignArgs& args);
CommandResult run_theory_check(const RunConfig& config, const TheoryArgs& args);
CommandResult run_report(const RunConfig& config, const ReportArgs& args);

/// `model_id`, or `model_id/setup_id` when the setup is non-empty.
std::string model_key(std::string_view model_id, std::string_view setup_id);

/// `model,family` lines; '#' comments allowed.
std::map<std::string, std::string> load_family_map(const fs::path& path);

/// Exit status: 0 success, 1 a verification check failed, 2 validation error,
/// 3 degenerate data.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ratkit
