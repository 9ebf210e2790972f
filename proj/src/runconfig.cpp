#include "nbvoi/runconfig.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "nbvoi/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace nbvoi {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(s);
  while (std::getline(in, part, sep)) parts.push_back(trim(part));
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

std::vector<std::string> whitespace_tokens(const std::string& s) {
  std::vector<std::string> tokens;
  std::istringstream in(s);
  std::string token;
  while (in >> token) tokens.push_back(token);
  return tokens;
}

double parse_f64(const std::string& raw, const std::string& where) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(raw.c_str(), &end);
  if (raw.empty() || end != raw.c_str() + raw.size() || errno == ERANGE ||
      !std::isfinite(v)) {
    throw ValidationError(where + ": expected a finite number, got \"" + raw + "\"");
  }
  return v;
}

std::int64_t parse_i64(const std::string& raw, const std::string& where) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
  if (ec != std::errc{} || ptr != raw.data() + raw.size()) {
    throw ValidationError(where + ": expected an integer, got \"" + raw + "\"");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& raw, const std::string& where) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
  if (ec != std::errc{} || ptr != raw.data() + raw.size()) {
    throw ValidationError(where + ": expected an unsigned integer, got \"" + raw + "\"");
  }
  return v;
}

bool parse_bool(const std::string& raw, const std::string& where) {
  if (raw == "true") return true;
  if (raw == "false") return false;
  throw ValidationError(where + ": expected true or false, got \"" + raw + "\"");
}

MarginalSpec parse_marginal(const std::string& value, const std::string& where) {
  const auto tokens = whitespace_tokens(value);
  if (tokens.size() < 2) {
    throw ValidationError(where + ": expected \"<kind> <name> ...\"");
  }
  const std::string& kind = tokens[0];
  const std::string& name = tokens[1];
  if (kind == "continuous") {
    if (tokens.size() != 4) {
      throw ValidationError(where + ": continuous takes \"<name> <mean> <sd>\"");
    }
    return MarginalSpec::normal(name, parse_f64(tokens[2], where),
                                parse_f64(tokens[3], where));
  }
  if (kind == "binary") {
    if (tokens.size() != 3) throw ValidationError(where + ": binary takes \"<name> <prob>\"");
    return MarginalSpec::bernoulli(name, parse_f64(tokens[2], where));
  }
  if (kind == "categorical") {
    if (tokens.size() < 4) {
      throw ValidationError(where + ": categorical takes \"<name> <level>:<prob> ...\"");
    }
    std::vector<std::string> levels;
    std::vector<double> probs;
    for (size_t i = 2; i < tokens.size(); ++i) {
      const auto colon = tokens[i].find(':');
      if (colon == std::string::npos || colon == 0) {
        throw ValidationError(where + ": expected <level>:<prob>, got \"" + tokens[i] + "\"");
      }
      levels.push_back(tokens[i].substr(0, colon));
      probs.push_back(parse_f64(tokens[i].substr(colon + 1), where));
    }
    return MarginalSpec::categorical(name, std::move(levels), std::move(probs));
  }
  throw ValidationError(where + ": unknown marginal kind \"" + kind + "\"");
}

std::string marginal_text(const MarginalSpec& m) {
  switch (m.kind) {
    case ColumnKind::continuous:
      return "continuous " + m.name + " " + format_double(m.mean) + " " +
             format_double(m.sd);
    case ColumnKind::binary:
      return "binary " + m.name + " " + format_double(m.prob);
    case ColumnKind::categorical: {
      std::string text = "categorical " + m.name;
      for (size_t k = 0; k < m.levels.size(); ++k) {
        text += " " + m.levels[k] + ":" + format_double(m.level_probs[k]);
      }
      return text;
    }
  }
  return {};
}

template <typename T, typename Fmt>
std::string join(const std::vector<T>& values, Fmt fmt) {
  std::string out;
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += fmt(values[i]);
  }
  return out;
}

const char* command_name(Command c) {
  switch (c) {
    case Command::decision_curve: return "decision-curve";
    case Command::voi: return "voi";
    case Command::synth_check: return "synth-check";
  }
  return "?";
}

const char* winner_name(int w) {
  switch (w) {
    case 0: return "treat-none";
    case 1: return "model";
    case 2: return "treat-all";
  }
  return "?";
}

// The generator inherits the run's master seed so one seed reproduces the
// whole pipeline.
GeneratorSpec resolved_synth(const RunConfig& cfg) {
  GeneratorSpec spec = cfg.synth;
  spec.rng = cfg.voi.rng;
  return spec;
}

void write_atomic(const fs::path& dir, const std::string& name, const std::string& content) {
  const fs::path tmp = dir / (name + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    out.flush();
    if (!out) throw ValidationError("cannot write output file: " + tmp.string());
  }
  fs::rename(tmp, dir / name);
}

Eigen::Index nearest_grid_index(const ThresholdGrid& grid, double z) {
  Eigen::Index best = 0;
  double best_gap = std::abs(grid[0] - z);
  for (Eigen::Index i = 1; i < grid.size(); ++i) {
    const double gap = std::abs(grid[i] - z);
    if (gap < best_gap) {
      best = i;
      best_gap = gap;
    }
  }
  return best;
}

json config_json(const RunConfig& cfg) {
  json glm{{"max_iter", cfg.voi.fit.max_iter},
           {"score_tol", cfg.voi.fit.score_tol},
           {"ridge_lambda", cfg.voi.fit.ridge_lambda},
           {"min_risk_clip", cfg.voi.fit.min_risk_clip}};
  json j{{"command", command_name(cfg.command)},
         {"data", cfg.data_path},
         {"schema", cfg.schema_text},
         {"iterations", cfg.voi.iterations},
         {"future_sizes", cfg.voi.future_sizes},
         {"grid", cfg.voi.grid.values()},
         {"outer_scheme",
          cfg.voi.outer_scheme == OuterScheme::bayesian ? "bayesian" : "ordinary"},
         {"estimator", cfg.voi.estimator == Estimator::winner_after_average
                           ? "winner_after_average"
                           : "winner_per_draw"},
         {"inequality",
          cfg.voi.inequality == ThresholdRule::non_strict ? "non_strict" : "strict"},
         {"evaluation_population",
          cfg.voi.evaluation_population == EvalPopulation::merged_sample
              ? "merged_sample"
              : "weighted_development"},
         {"seed", cfg.voi.rng.master_seed},
         {"keep_increments", cfg.voi.keep_increments},
         {"max_degenerate_fraction", cfg.voi.max_degenerate_fraction},
         {"glm", glm},
         {"threads", cfg.threads},
         {"out", cfg.out_dir},
         {"annual_decisions", cfg.annual_decisions},
         {"reporting_thresholds", cfg.reporting_thresholds},
         {"oracle_n_mc", cfg.oracle_n_mc}};
  if (!cfg.synth.marginals.empty()) {
    std::vector<std::string> marginals;
    for (const auto& m : cfg.synth.marginals) marginals.push_back(marginal_text(m));
    std::vector<double> theta(cfg.synth.theta_true.begin(), cfg.synth.theta_true.end());
    j["synth"] = json{{"n", cfg.synth.n}, {"theta", theta}, {"marginals", marginals}};
  }
  return j;
}

std::string decision_curve_csv(const VoiResult& res, const ThresholdGrid& grid) {
  const Eigen::Index nz = grid.size();
  std::string text = "z,enb_none,enb_model,enb_all,ci_lo,ci_hi\n";
  for (Eigen::Index i = 0; i < nz; ++i) {
    std::vector<double> increments;
    increments.reserve(static_cast<size_t>(res.increments.rows()));
    for (Eigen::Index t = 0; t < res.increments.rows(); ++t) {
      const double v = res.increments(t, i);
      if (!std::isnan(v)) increments.push_back(v);
    }
    std::sort(increments.begin(), increments.end());
    text += format_double(grid[i]);
    text += ",0,";
    text += format_double(res.enb.enb_model[i]);
    text += ',';
    text += format_double(res.enb.enb_all[i]);
    text += ',';
    text += format_double(percentile(increments, 0.025));
    text += ',';
    text += format_double(percentile(increments, 0.975));
    text += '\n';
  }
  return text;
}

std::string voi_csv(const VoiResult& res, const ThresholdGrid& grid) {
  std::string text = "z,future_n,evpi,evsi_raw,evsi_clamped,mc_se\n";
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    for (size_t k = 0; k < res.future_sizes.size(); ++k) {
      text += format_double(grid[i]);
      text += ',';
      text += std::to_string(res.future_sizes[k]);
      text += ',';
      text += format_double(res.evpi[i]);
      text += ',';
      text += format_double(res.evsi_raw[k][i]);
      text += ',';
      text += format_double(res.evsi_clamped[k][i]);
      text += ',';
      text += format_double(res.evsi_mc_se[k][i]);
      text += '\n';
    }
  }
  return text;
}

json reporting_json(const RunConfig& cfg, const VoiResult& res) {
  json reports = json::array();
  const ThresholdGrid& grid = cfg.voi.grid;
  for (const double requested : cfg.reporting_thresholds) {
    const Eigen::Index i = nearest_grid_index(grid, requested);
    const double z = grid[i];
    json entry{{"threshold_requested", requested},
               {"threshold", z},
               {"winner", res.winner_current[static_cast<size_t>(i)]},
               {"winner_name", winner_name(res.winner_current[static_cast<size_t>(i)])},
               {"enb_none", 0.0},
               {"enb_model", res.enb.enb_model[i]},
               {"enb_all", res.enb.enb_all[i]},
               {"enb_perfect", res.enb.enb_perfect[i]},
               {"evpi", res.evpi[i]}};
    json evsi = json::array();
    for (size_t k = 0; k < res.future_sizes.size(); ++k) {
      evsi.push_back(json{{"future_n", res.future_sizes[k]},
                          {"raw", res.evsi_raw[k][i]},
                          {"clamped", res.evsi_clamped[k][i]},
                          {"mc_se", res.evsi_mc_se[k][i]}});
    }
    entry["evsi"] = evsi;
    if (cfg.annual_decisions > 0.0) {
      const auto evpi_scaled = scale_to_population(res.evpi[i], cfg.annual_decisions, z);
      json scaled_evsi = json::array();
      for (size_t k = 0; k < res.future_sizes.size(); ++k) {
        const auto s =
            scale_to_population(res.evsi_clamped[k][i], cfg.annual_decisions, z);
        scaled_evsi.push_back(json{{"future_n", res.future_sizes[k]},
                                   {"net_tp_per_year", s.net_tp_per_year},
                                   {"fp_averted_per_year", s.fp_averted_per_year}});
      }
      entry["population"] = json{{"annual_decisions", cfg.annual_decisions},
                                 {"evpi",
                                  json{{"net_tp_per_year", evpi_scaled.net_tp_per_year},
                                       {"fp_averted_per_year",
                                        evpi_scaled.fp_averted_per_year}}},
                                 {"evsi", scaled_evsi}};
    }
    reports.push_back(std::move(entry));
  }
  return reports;
}

json summary_base(const RunConfig& cfg) {
  return json{{"format_version", 1},
              {"master_seed", cfg.voi.rng.master_seed},
              {"config_hash", [&] {
                 std::ostringstream hex;
                 hex << std::hex << std::setw(16) << std::setfill('0')
                     << fnv1a64(canonical_config_text(cfg));
                 return hex.str();
               }()},
              {"config", config_json(cfg)}};
}

std::string decoded_data_csv(const Dataset& d) {
  std::string text;
  const auto& specs = d.specs();
  for (size_t s = 0; s < specs.size(); ++s) {
    if (s) text += ',';
    text += specs[s].name;
  }
  text += '\n';
  for (Eigen::Index r = 0; r < d.n(); ++r) {
    Eigen::Index col = 1;
    for (size_t s = 0; s < specs.size(); ++s) {
      const auto& spec = specs[s];
      if (s) text += ',';
      if (spec.role == ColumnRole::outcome) {
        text += d.y()[r] == 1.0 ? '1' : '0';
        continue;
      }
      switch (spec.kind) {
        case ColumnKind::continuous:
          text += format_double(d.x()(r, col));
          ++col;
          break;
        case ColumnKind::binary:
          text += d.x()(r, col) == 1.0 ? '1' : '0';
          ++col;
          break;
        case ColumnKind::categorical:
          text += d.categorical_level(r, spec.name);
          col += static_cast<Eigen::Index>(spec.levels.size()) - 1;
          break;
      }
    }
    text += '\n';
  }
  return text;
}

void run_synth_check(const RunConfig& cfg, const fs::path& out_dir) {
  const GeneratorSpec spec = resolved_synth(cfg);
  const Dataset d = generate(spec);
  const Coefficients theta_hat =
      fit_weighted_logistic(d, WeightVector::uniform(d.n()), cfg.voi.fit);
  const NbTable oracle = true_nb_oracle(spec, theta_hat, cfg.voi.grid, cfg.oracle_n_mc,
                                        cfg.voi.inequality);

  std::string curve = "z,nb_model,nb_all,nb_perfect,se_model,se_all,se_perfect\n";
  for (Eigen::Index i = 0; i < cfg.voi.grid.size(); ++i) {
    curve += format_double(oracle.z[static_cast<size_t>(i)]);
    curve += ',';
    curve += format_double(oracle.nb_model[i]);
    curve += ',';
    curve += format_double(oracle.nb_all[i]);
    curve += ',';
    curve += format_double(oracle.nb_perfect[i]);
    curve += ',';
    curve += format_double(oracle.se_model[i]);
    curve += ',';
    curve += format_double(oracle.se_all[i]);
    curve += ',';
    curve += format_double(oracle.se_perfect[i]);
    curve += '\n';
  }

  json summary = summary_base(cfg);
  std::vector<double> theta_true(spec.theta_true.begin(), spec.theta_true.end());
  std::vector<double> theta_fit(theta_hat.beta.begin(), theta_hat.beta.end());
  summary["synth_check"] =
      json{{"n", d.n()},
           {"prevalence", empirical_prevalence(d, WeightVector::uniform(d.n()))},
           {"theta_true", theta_true},
           {"theta_hat", theta_fit},
           {"fit_converged", theta_hat.converged},
           {"ridge_lambda_used", theta_hat.ridge_lambda_used}};

  write_atomic(out_dir, "synth_data.csv", decoded_data_csv(d));
  write_atomic(out_dir, "oracle_curve.csv", curve);
  write_atomic(out_dir, "summary.json", summary.dump(2) + "\n");
}

}  // namespace

std::vector<ColumnSpec> parse_schema(const std::string& schema_text) {
  std::vector<ColumnSpec> schema;
  for (const std::string& item : split(schema_text, ';')) {
    if (item.empty()) continue;
    const auto tokens = whitespace_tokens(item);
    const std::string where = "schema item \"" + item + "\"";
    if (tokens.size() < 2) {
      throw ValidationError(where + ": expected \"<kind> <name> [levels]\"");
    }
    ColumnSpec spec;
    spec.name = tokens[1];
    const std::string& kind = tokens[0];
    if (kind == "outcome") {
      spec.role = ColumnRole::outcome;
      if (tokens.size() == 2) {
        spec.kind = ColumnKind::binary;
      } else if (tokens.size() == 3) {
        spec.kind = ColumnKind::categorical;
        spec.levels = split(tokens[2], ',');
      } else {
        throw ValidationError(where + ": outcome takes \"<name>\" or \"<name> <L0>,<L1>\"");
      }
    } else if (kind == "continuous" || kind == "binary") {
      if (tokens.size() != 2) throw ValidationError(where + ": takes only a name");
      spec.kind = kind == "continuous" ? ColumnKind::continuous : ColumnKind::binary;
    } else if (kind == "categorical") {
      if (tokens.size() != 3) {
        throw ValidationError(where + ": categorical takes \"<name> <L0>,<L1>,...\"");
      }
      spec.kind = ColumnKind::categorical;
      spec.levels = split(tokens[2], ',');
    } else {
      throw ValidationError(where + ": unknown column kind \"" + kind + "\"");
    }
    schema.push_back(std::move(spec));
  }
  validate_schema(schema);
  return schema;
}

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::unordered_set<std::string> seen;
  std::vector<MarginalSpec> marginals;
  bool grid_set = false;

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(where + ": expected \"key = value\"");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ValidationError(where + ": expected \"key = value\"");
    }
    if (key != "synth_marginal" && !seen.insert(key).second) {
      throw ValidationError(where + ": duplicate key \"" + key + "\"");
    }

    if (key == "command") {
      if (value == "decision-curve") {
        cfg.command = Command::decision_curve;
      } else if (value == "voi") {
        cfg.command = Command::voi;
      } else if (value == "synth-check") {
        cfg.command = Command::synth_check;
      } else {
        throw ValidationError(where +
                              ": command must be decision-curve, voi, or synth-check");
      }
    } else if (key == "data") {
      cfg.data_path = value;
    } else if (key == "schema") {
      cfg.schema_text = value;
    } else if (key == "iterations") {
      cfg.voi.iterations = parse_i64(value, where);
    } else if (key == "future_sizes") {
      cfg.voi.future_sizes.clear();
      for (const auto& item : split(value, ',')) {
        cfg.voi.future_sizes.push_back(parse_i64(item, where));
      }
    } else if (key == "grid") {
      if (value.find(':') != std::string::npos) {
        const auto parts = split(value, ':');
        if (parts.size() != 3) {
          throw ValidationError(where + ": grid range is \"<lo>:<hi>:<step>\"");
        }
        cfg.voi.grid = ThresholdGrid::regular(parse_f64(parts[0], where),
                                              parse_f64(parts[1], where),
                                              parse_f64(parts[2], where));
      } else {
        std::vector<double> z;
        for (const auto& item : split(value, ',')) z.push_back(parse_f64(item, where));
        cfg.voi.grid = ThresholdGrid(std::move(z));
      }
      grid_set = true;
    } else if (key == "outer_scheme") {
      if (value == "bayesian") {
        cfg.voi.outer_scheme = OuterScheme::bayesian;
      } else if (value == "ordinary") {
        cfg.voi.outer_scheme = OuterScheme::ordinary;
      } else {
        throw ValidationError(where + ": outer_scheme must be bayesian or ordinary");
      }
    } else if (key == "estimator") {
      if (value == "winner_after_average") {
        cfg.voi.estimator = Estimator::winner_after_average;
      } else if (value == "winner_per_draw") {
        cfg.voi.estimator = Estimator::winner_per_draw;
      } else {
        throw ValidationError(
            where + ": estimator must be winner_after_average or winner_per_draw");
      }
    } else if (key == "inequality") {
      if (value == "non_strict") {
        cfg.voi.inequality = ThresholdRule::non_strict;
      } else if (value == "strict") {
        cfg.voi.inequality = ThresholdRule::strict;
      } else {
        throw ValidationError(where + ": inequality must be non_strict or strict");
      }
    } else if (key == "evaluation_population") {
      if (value == "merged_sample") {
        cfg.voi.evaluation_population = EvalPopulation::merged_sample;
      } else if (value == "weighted_development") {
        cfg.voi.evaluation_population = EvalPopulation::weighted_development;
      } else {
        throw ValidationError(
            where + ": evaluation_population must be merged_sample or weighted_development");
      }
    } else if (key == "seed") {
      cfg.voi.rng.master_seed = parse_u64(value, where);
    } else if (key == "threads") {
      cfg.threads = static_cast<int>(parse_i64(value, where));
    } else if (key == "out") {
      cfg.out_dir = value;
    } else if (key == "annual_decisions") {
      cfg.annual_decisions = parse_f64(value, where);
      if (cfg.annual_decisions < 0.0) {
        throw ValidationError(where + ": annual_decisions must be >= 0");
      }
    } else if (key == "reporting_thresholds") {
      cfg.reporting_thresholds.clear();
      for (const auto& item : split(value, ',')) {
        const double z = parse_f64(item, where);
        if (!(z > 0.0 && z < 1.0)) {
          throw ValidationError(where + ": reporting thresholds must lie inside (0, 1)");
        }
        cfg.reporting_thresholds.push_back(z);
      }
    } else if (key == "keep_increments") {
      cfg.voi.keep_increments = parse_bool(value, where);
    } else if (key == "max_degenerate_fraction") {
      cfg.voi.max_degenerate_fraction = parse_f64(value, where);
    } else if (key == "synth_n") {
      cfg.synth.n = static_cast<Eigen::Index>(parse_i64(value, where));
    } else if (key == "synth_theta") {
      const auto items = split(value, ',');
      cfg.synth.theta_true.resize(static_cast<Eigen::Index>(items.size()));
      for (size_t i = 0; i < items.size(); ++i) {
        cfg.synth.theta_true[static_cast<Eigen::Index>(i)] = parse_f64(items[i], where);
      }
    } else if (key == "synth_marginal") {
      marginals.push_back(parse_marginal(value, where));
    } else if (key == "oracle_n_mc") {
      cfg.oracle_n_mc = static_cast<Eigen::Index>(parse_i64(value, where));
    } else {
      throw ValidationError(where + ": unknown key \"" + key + "\"");
    }
  }

  cfg.synth.marginals = std::move(marginals);
  if (!grid_set) cfg.voi.grid = ThresholdGrid::percent_grid();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path);
}

std::string canonical_config_text(const RunConfig& cfg) {
  std::ostringstream out;
  out << "command = " << command_name(cfg.command) << '\n';
  out << "data = " << cfg.data_path << '\n';
  out << "schema = " << cfg.schema_text << '\n';
  out << "iterations = " << cfg.voi.iterations << '\n';
  out << "future_sizes = "
      << join(cfg.voi.future_sizes,
              [](std::int64_t v) { return std::to_string(v); })
      << '\n';
  out << "grid = " << join(cfg.voi.grid.values(), format_double) << '\n';
  out << "outer_scheme = "
      << (cfg.voi.outer_scheme == OuterScheme::bayesian ? "bayesian" : "ordinary") << '\n';
  out << "estimator = "
      << (cfg.voi.estimator == Estimator::winner_after_average ? "winner_after_average"
                                                               : "winner_per_draw")
      << '\n';
  out << "inequality = "
      << (cfg.voi.inequality == ThresholdRule::non_strict ? "non_strict" : "strict")
      << '\n';
  out << "evaluation_population = "
      << (cfg.voi.evaluation_population == EvalPopulation::merged_sample
              ? "merged_sample"
              : "weighted_development")
      << '\n';
  out << "seed = " << cfg.voi.rng.master_seed << '\n';
  out << "keep_increments = " << (cfg.voi.keep_increments ? "true" : "false") << '\n';
  out << "max_degenerate_fraction = " << format_double(cfg.voi.max_degenerate_fraction)
      << '\n';
  out << "glm_max_iter = " << cfg.voi.fit.max_iter << '\n';
  out << "glm_score_tol = " << format_double(cfg.voi.fit.score_tol) << '\n';
  out << "glm_ridge_lambda = " << format_double(cfg.voi.fit.ridge_lambda) << '\n';
  out << "glm_min_risk_clip = " << format_double(cfg.voi.fit.min_risk_clip) << '\n';
  out << "annual_decisions = " << format_double(cfg.annual_decisions) << '\n';
  out << "reporting_thresholds = " << join(cfg.reporting_thresholds, format_double)
      << '\n';
  if (!cfg.synth.marginals.empty()) {
    out << "synth_n = " << cfg.synth.n << '\n';
    std::vector<double> theta(cfg.synth.theta_true.begin(), cfg.synth.theta_true.end());
    out << "synth_theta = " << join(theta, format_double) << '\n';
    for (const auto& m : cfg.synth.marginals) {
      out << "synth_marginal = " << marginal_text(m) << '\n';
    }
  }
  out << "oracle_n_mc = " << cfg.oracle_n_mc << '\n';
  return out.str();
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (const char c : s) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double percentile(const std::vector<double>& sorted_values, double p) {
  if (sorted_values.empty()) throw ValidationError("percentile: no values");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("percentile: p outside [0, 1]");
  const size_t n = sorted_values.size();
  const double h = p * static_cast<double>(n - 1);
  const auto lo = static_cast<size_t>(h);
  const size_t hi = std::min(lo + 1, n - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted_values[lo] + frac * (sorted_values[hi] - sorted_values[lo]);
}

Dataset resolve_dataset(const RunConfig& cfg) {
  if (!cfg.data_path.empty()) {
    if (cfg.schema_text.empty()) {
      throw ValidationError("config: a data path needs a schema");
    }
    return load_csv(cfg.data_path, parse_schema(cfg.schema_text));
  }
  if (cfg.synth.marginals.empty()) {
    throw ValidationError("config: neither a data path nor a synthetic generator given");
  }
  return generate(resolved_synth(cfg));
}

std::string render_plot_data(const std::string& voi_csv_text) {
  std::istringstream in(voi_csv_text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "z,future_n,evpi,evsi_raw,evsi_clamped,mc_se") {
    throw ValidationError("plot data: unexpected header in long-format table");
  }
  std::vector<std::string> z_order;
  std::vector<std::string> size_order;
  std::unordered_set<std::string> z_seen, size_seen;
  struct Cell {
    std::string evpi, clamped;
  };
  std::map<std::pair<std::string, std::string>, Cell> cells;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 6) {
      throw ValidationError("plot data: malformed row at line " + std::to_string(line_no));
    }
    const std::string& z = fields[0];
    const std::string& size = fields[1];
    if (z_seen.insert(z).second) z_order.push_back(z);
    if (size_seen.insert(size).second) size_order.push_back(size);
    cells[{z, size}] = Cell{fields[2], fields[4]};
  }
  if (z_order.empty()) throw ValidationError("plot data: no rows");

  std::string out = "z";
  for (const auto& size : size_order) out += ",evsi_n" + size;
  out += ",evpi\n";
  for (const auto& z : z_order) {
    out += z;
    std::string evpi;
    for (const auto& size : size_order) {
      const auto it = cells.find({z, size});
      if (it == cells.end()) {
        throw ValidationError("plot data: missing cell for z = " + z + ", future_n = " +
                              size);
      }
      out += ',' + it->second.clamped;
      evpi = it->second.evpi;
    }
    out += ',' + evpi + '\n';
  }
  return out;
}

void run(const RunConfig& cfg) {
  const fs::path out_dir(cfg.out_dir.empty() ? "." : cfg.out_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw ValidationError("cannot create output directory: " + out_dir.string());

  if (cfg.command == Command::synth_check) {
    run_synth_check(cfg, out_dir);
    return;
  }

  const Dataset d = resolve_dataset(cfg);
  VoiConfig engine_cfg = cfg.voi;
  engine_cfg.keep_increments = true;  // the decision-curve band needs them
  if (cfg.command == Command::decision_curve) {
    engine_cfg.future_sizes.clear();
  } else if (engine_cfg.future_sizes.empty()) {
    throw ValidationError("config: the voi command needs future_sizes");
  }

  const VoiResult res = run_voi(d, engine_cfg, cfg.threads);

  write_atomic(out_dir, "decision_curve.csv", decision_curve_csv(res, engine_cfg.grid));
  if (cfg.command == Command::voi) {
    const std::string long_csv = voi_csv(res, engine_cfg.grid);
    write_atomic(out_dir, "voi.csv", long_csv);
    write_atomic(out_dir, "voi_wide.csv", render_plot_data(long_csv));
  }

  json summary = summary_base(cfg);
  summary["data"] = json{{"rows", d.n()},
                         {"design_columns", d.p()},
                         {"prevalence",
                          empirical_prevalence(d, WeightVector::uniform(d.n()))}};
  summary["diagnostics"] =
      json{{"usable_iterations", res.diagnostics.usable_iterations},
           {"degenerate_iterations", res.diagnostics.degenerate_iterations},
           {"ridge_fallback_fits", res.diagnostics.ridge_fallback_fits}};
  summary["reporting"] = reporting_json(cfg, res);
  write_atomic(out_dir, "summary.json", summary.dump(2) + "\n");
}

}  // namespace nbvoi
