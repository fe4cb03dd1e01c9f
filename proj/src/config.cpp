#include "ratkit/config.hpp"

#include "ratkit/records.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace ratkit {

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r";
  const auto lo = s.find_first_not_of(ws);
  if (lo == std::string_view::npos) return {};
  const auto hi = s.find_last_not_of(ws);
  return s.substr(lo, hi - lo + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ValidationError("config key '" + std::string(key) + "': cannot parse '" + std::string(text) + "'");
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ValidationError("config key '" + std::string(key) + "': expected boolean");
}

}  // namespace

std::string_view to_string(QuartileMethod m) {
  switch (m) {
    case QuartileMethod::Linear: return "linear";
    case QuartileMethod::Exclusive: return "exclusive";
    case QuartileMethod::Nearest: return "nearest";
  }
  return "linear";
}

QuartileMethod parse_quartile_method(std::string_view name) {
  if (name == "linear") return QuartileMethod::Linear;
  if (name == "exclusive") return QuartileMethod::Exclusive;
  if (name == "nearest") return QuartileMethod::Nearest;
  throw ValidationError("unknown quartile method '" + std::string(name) + "'");
}

std::vector<std::size_t> parse_count_list(std::string_view text) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    const auto item = trim(text.substr(pos, comma - pos));
    if (!item.empty()) out.push_back(parse_number<std::size_t>("list", item));
    pos = comma + 1;
  }
  if (out.empty()) throw ValidationError("empty count list");
  return out;
}

void RunConfig::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValidationError("alpha must be > 0");
  if (!(tau > 0.0 && tau <= 1.0)) throw ValidationError("tau must lie in (0, 1]");
  if (draws == 0) throw ValidationError("draws must be >= 1");
  if (budgets.empty()) throw ValidationError("budget list is empty");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ValidationError("test fraction must lie in (0, 1)");
  if (!(balance_tol >= 0.0)) throw ValidationError("balance tolerance must be >= 0");
  if (min_votes == 0) throw ValidationError("min votes must be >= 1");
  if (threads == 0) throw ValidationError("threads must be >= 1");
}

RunConfig parse_config(std::string_view text, RunConfig cfg) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view s = line;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError("config line " + std::to_string(number) + ": expected key = value");
    }
    const auto key = trim(s.substr(0, eq));
    const auto value = trim(s.substr(eq + 1));
    if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "alpha") cfg.alpha = parse_number<double>(key, value);
    else if (key == "tau") cfg.tau = parse_number<double>(key, value);
    else if (key == "permutations") cfg.permutations = parse_number<std::size_t>(key, value);
    else if (key == "correlation_permutations") cfg.correlation_permutations = parse_number<std::size_t>(key, value);
    else if (key == "draws") cfg.draws = parse_number<std::size_t>(key, value);
    else if (key == "budgets") cfg.budgets = parse_count_list(value);
    else if (key == "quartile_method") cfg.quartile_method = parse_quartile_method(value);
    else if (key == "min_votes") cfg.min_votes = parse_number<std::size_t>(key, value);
    else if (key == "test_fraction") cfg.test_fraction = parse_number<double>(key, value);
    else if (key == "balance_tol") cfg.balance_tol = parse_number<double>(key, value);
    else if (key == "normalize") cfg.normalize = parse_bool(key, value);
    else if (key == "threads") cfg.threads = parse_number<unsigned>(key, value);
    else if (key == "out_dir") cfg.out_dir = std::string(value);
    else throw ValidationError("config line " + std::to_string(number) + ": unknown key '" + std::string(key) + "'");
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  return parse_config(read_file(path), std::move(base));
}

}  // namespace ratkit
