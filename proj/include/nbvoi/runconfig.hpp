#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nbvoi/dataset.hpp"
#include "nbvoi/synth.hpp"
#include "nbvoi/voi.hpp"

namespace nbvoi {

enum class Command { decision_curve, voi, synth_check };

// A fully resolved run: where the data comes from, how the engine is
// configured, and where outputs go. Parsed from a flat key = value config
// file (lists comma separated, # comments). When data_path is empty the
// development sample is generated from the synth block instead, which is
// also what synth-check exercises.
struct RunConfig {
  Command command = Command::voi;
  std::string data_path;
  std::string schema_text;
  VoiConfig voi;
  int threads = 0;
  std::string out_dir = ".";
  // Decisions per year for population scaling; 0 disables the scaled block
  // in summary.json.
  double annual_decisions = 0.0;
  // Thresholds highlighted in summary.json, each matched to the nearest
  // grid point.
  std::vector<double> reporting_thresholds = {0.02, 0.21};
  GeneratorSpec synth;
  Eigen::Index oracle_n_mc = 100000;
};

// Schema text is a semicolon-separated column list: "outcome NAME" or
// "outcome NAME L0,L1" for the outcome, "continuous NAME", "binary NAME",
// "categorical NAME L0,L1,..." for predictors.
std::vector<ColumnSpec> parse_schema(const std::string& schema_text);

RunConfig parse_run_config(const std::string& text, const std::string& origin);
RunConfig load_run_config(const std::string& path);

// Canonical one-key-per-line rendering of every resolved setting; hashing
// it yields the config_hash echoed in summary.json.
std::string canonical_config_text(const RunConfig& cfg);
std::uint64_t fnv1a64(std::string_view s);

// Shortest decimal string that parses back to exactly v.
std::string format_double(double v);

// Linear-interpolation percentile (quantile type 7) of ascending values,
// p in [0, 1].
double percentile(const std::vector<double>& sorted_values, double p);

// Loads the CSV named by the config, or generates a synthetic sample when
// no data path is set.
Dataset resolve_dataset(const RunConfig& cfg);

// Pivots the long-format voi.csv text into a plot-ready wide table: one z
// column, one clamped-EVSI column per future size, and an evpi column.
std::string render_plot_data(const std::string& voi_csv_text);

// Executes the configured command and writes its outputs into cfg.out_dir
// (created if missing): decision-curve writes decision_curve.csv and
// summary.json; voi additionally writes voi.csv and voi_wide.csv;
// synth-check writes synth_data.csv, oracle_curve.csv, and summary.json.
// Writes are atomic (temp file then rename). Throws on any failure.
void run(const RunConfig& cfg);

}  // namespace nbvoi
