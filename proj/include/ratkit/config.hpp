#pragma once

#include "ratkit/core.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ratkit {

enum class QuartileMethod {
  Linear,     ///< h = (n-1)p, interpolate between order statistics (inclusive)
  Exclusive,  ///< h = (n+1)p - 1, clamped to the sample range
  Nearest,    ///< nearest-rank: x[ceil(np) - 1]
};

std::string_view to_string(QuartileMethod m);
QuartileMethod parse_quartile_method(std::string_view name);

/// Analysis settings shared by every subcommand. Defaults carry the constants the
/// reference study states: tau = 0.95, 199 permutations, 10 draws per input.
struct RunConfig {
  std::uint64_t seed = 0;
  double alpha = 1.0;
  double tau = 0.95;
  std::size_t permutations = 199;
  std::size_t correlation_permutations = 9999;
  std::size_t draws = 10;
  std::vector<std::size_t> budgets{1, 2, 3, 4, 5};
  QuartileMethod quartile_method = QuartileMethod::Linear;
  std::size_t min_votes = 2;
  double test_fraction = 0.2;
  double balance_tol = 0.05;
  bool normalize = false;  // L2-normalize embeddings before analysis

  // Execution settings; never echoed into reports.
  unsigned threads = 1;
  std::filesystem::path out_dir = ".";

  void validate() const;
};

/// Applies `key = value` lines (# comments, blank lines allowed) on top of `base`.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

std::vector<std::size_t> parse_count_list(std::string_view text);

}  // namespace ratkit
