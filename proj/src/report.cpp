#include "ratkit/report.hpp"

#include "ratkit/records.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

namespace ratkit {

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

std::string format_optional(const std::optional<double>& x) { return x ? format_real(*x) : std::string(); }

ojson config_echo(const RunConfig& c) {
  ojson j;
  j["seed"] = c.seed;
  j["alpha"] = c.alpha;
  j["tau"] = c.tau;
  j["permutations"] = c.permutations;
  j["correlation_permutations"] = c.correlation_permutations;
  j["draws"] = c.draws;
  j["budgets"] = c.budgets;
  j["quartile_method"] = std::string(to_string(c.quartile_method));
  j["min_votes"] = c.min_votes;
  j["test_fraction"] = c.test_fraction;
  j["balance_tol"] = c.balance_tol;
  j["normalize"] = c.normalize;
  return j;
}

ojson report_header(std::string_view command, const RunConfig& config,
                    const std::vector<std::pair<std::string, std::string>>& inputs) {
  ojson h;
  h["tool"] = std::string(kToolName);
  h["version"] = std::string(kToolVersion);
  h["command"] = std::string(command);
  h["seed"] = config.seed;
  h["config"] = config_echo(config);
  ojson in = ojson::object();
  for (const auto& [name, path] : inputs) in[name] = path;
  h["inputs"] = std::move(in);
  return h;
}

ojson json_real(const std::optional<double>& x) {
  if (!x || !std::isfinite(*x)) return nullptr;
  return *x;
}

std::string csv_escape(std::string_view cell) {
  if (cell.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(cell);
  std::string out = "\"";
  for (char ch : cell) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

void CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != columns_.size()) throw std::logic_error("csv row width does not match header");
  rows_.push_back(std::move(cells));
}

std::string CsvTable::str(const ojson* header) const {
  std::string out;
  if (header) {
    out += "# " + std::string(kToolName) + " " + std::string(kToolVersion) + " " +
           header->value("command", std::string()) + "\n";
    out += "# header: " + header->dump() + "\n";
  }
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += csv_escape(cells[i]);
    }
    out += '\n';
  };
  line(columns_);
  for (const auto& r : rows_) line(r);
  return out;
}

std::size_t CsvDocument::column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw ValidationError("CSV is missing column '" + std::string(name) + "'");
}

CsvDocument parse_csv(std::string_view text) {
  CsvDocument doc;
  bool have_header = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (text[pos] == '#') {
      const auto nl = text.find('\n', pos);
      pos = nl == std::string_view::npos ? text.size() : nl + 1;
      continue;
    }
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (; pos < text.size(); ++pos) {
      const char ch = text[pos];
      if (quoted) {
        if (ch == '"' && pos + 1 < text.size() && text[pos + 1] == '"') {
          cell += '"';
          ++pos;
        } else if (ch == '"') {
          quoted = false;
        } else {
          cell += ch;
        }
      } else if (ch == '"') {
        quoted = true;
      } else if (ch == ',') {
        cells.push_back(std::move(cell));
        cell.clear();
      } else if (ch == '\n') {
        ++pos;
        break;
      } else if (ch != '\r') {
        cell += ch;
      }
    }
    cells.push_back(std::move(cell));
    if (cells.size() == 1 && cells[0].empty()) continue;
    if (!have_header) {
      doc.columns = std::move(cells);
      have_header = true;
    } else {
      if (cells.size() != doc.columns.size()) throw ValidationError("CSV row width does not match header");
      doc.rows.push_back(std::move(cells));
    }
  }
  if (!have_header) throw ValidationError("CSV has no header row");
  return doc;
}

void OutputBundle::add(std::filesystem::path path, std::string contents) {
  files_.emplace_back(std::move(path), std::move(contents));
}

void OutputBundle::merge(OutputBundle other) {
  for (auto& f : other.files_) files_.push_back(std::move(f));
}

void OutputBundle::write_all() const {
  for (const auto& [path, contents] : files_) write_file(path, contents);
}

const std::string* OutputBundle::find(const std::filesystem::path& path) const {
  for (const auto& [p, c] : files_) {
    if (p == path) return &c;
  }
  return nullptr;
}

namespace {

std::string file_safe(std::string_view s) {
  std::string out;
  for (char ch : s) out += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_') ? ch : '-';
  return out;
}

std::string cell_of(const ojson& v) {
  if (v.is_null()) return {};
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return format_real(v.get<double>());
  return v.dump();
}

}  // namespace

OutputBundle export_plot_data(const ojson& report, const std::filesystem::path& dir) {
  const std::string kind = report.value("kind", std::string());
  OutputBundle out;
  ojson schema;
  schema["report_kind"] = kind;
  ojson series = ojson::array();

  if (kind == "alignment") {
    const std::vector<std::string> cols{"pair_id", "delta_metric", "preference_rate"};
    for (const auto& a : report.value("alignments", ojson::array())) {
      CsvTable t(cols);
      for (const auto& p : a.value("points", ojson::array())) {
        t.add_row({cell_of(p["pair_id"]), cell_of(p["delta_metric"]), cell_of(p["preference_rate"])});
      }
      const std::string name = "alignment_" + file_safe(a.value("metric", std::string())) + "_" +
                               file_safe(a.value("scope", std::string())) + ".csv";
      out.add(dir / name, t.str());
      ojson s;
      s["file"] = name;
      s["panel"] = "metric difference (A - B) against preference rate for A";
      s["columns"] = ojson{{"pair_id", "model pair 'A|B', A lexicographically first"},
                           {"delta_metric", "metric(A) - metric(B)"},
                           {"preference_rate", "fraction of judgments preferring A"}};
      series.push_back(std::move(s));
    }
  } else if (kind == "coverage_budget") {
    CsvTable t({"backend", "generator", "B", "r_avg", "r_max"});
    for (const auto& row : report.value("rows", ojson::array())) {
      for (const auto& c : row.value("cells", ojson::array())) {
        t.add_row({cell_of(row["backend"]), cell_of(row["generator"]), cell_of(c["budget"]), cell_of(c["r_avg"]),
                   cell_of(c["r_max"])});
      }
    }
    out.add(dir / "coverage_budget.csv", t.str());
    ojson s;
    s["file"] = "coverage_budget.csv";
    s["panel"] = "random-baseline coverage against budget";
    s["columns"] = ojson{{"backend", "embedding backend id"},
                         {"generator", "generator whose sources are sampled"},
                         {"B", "number of sources drawn per input"},
                         {"r_avg", "mean nearest-selected distance, averaged over draws and inputs"},
                         {"r_max", "max nearest-selected distance, averaged over draws and inputs"}};
    series.push_back(std::move(s));
  } else {
    throw ValidationError("no plot data for report kind '" + kind + "'");
  }
  schema["series"] = std::move(series);
  out.add(dir / ("plot_schema_" + file_safe(kind) + ".json"), schema.dump(2) + "\n");
  return out;
}

}  // namespace ratkit
