#include "nbvoi/synth.hpp"

#include <cmath>
#include <unordered_set>

#include "nbvoi/errors.hpp"

namespace nbvoi {

namespace {

double logistic(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

void validate_marginals(const std::vector<MarginalSpec>& marginals) {
  if (marginals.empty()) throw ValidationError("generator: no covariate marginals");
  std::unordered_set<std::string> names;
  for (const auto& m : marginals) {
    if (m.name.empty()) throw ValidationError("generator: marginal with empty name");
    if (!names.insert(m.name).second) {
      throw ValidationError("generator: duplicate marginal name \"" + m.name + "\"");
    }
    switch (m.kind) {
      case ColumnKind::continuous:
        if (!(m.sd > 0.0) || !std::isfinite(m.mean) || !std::isfinite(m.sd)) {
          throw ValidationError("generator: \"" + m.name + "\" needs finite mean, sd > 0");
        }
        break;
      case ColumnKind::binary:
        if (!(m.prob >= 0.0 && m.prob <= 1.0)) {
          throw ValidationError("generator: \"" + m.name + "\" needs prob in [0, 1]");
        }
        break;
      case ColumnKind::categorical: {
        if (m.levels.size() < 2 || m.level_probs.size() != m.levels.size()) {
          throw ValidationError("generator: \"" + m.name +
                                "\" needs >= 2 levels with one probability each");
        }
        double sum = 0.0;
        for (const double p : m.level_probs) {
          if (!(p >= 0.0)) {
            throw ValidationError("generator: \"" + m.name + "\" has a negative probability");
          }
          sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
          throw ValidationError("generator: \"" + m.name + "\" probabilities must sum to 1");
        }
        break;
      }
    }
  }
}

// One covariate row in encoded design layout (after the intercept). The
// strided reference accepts rows of a column-major matrix directly.
void draw_row(const std::vector<MarginalSpec>& marginals, Stream& stream,
              Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row) {
  Eigen::Index col = 0;
  for (const auto& m : marginals) {
    switch (m.kind) {
      case ColumnKind::continuous:
        row[col++] = stream.next_normal(m.mean, m.sd);
        break;
      case ColumnKind::binary:
        row[col++] = stream.next_bernoulli(m.prob) ? 1.0 : 0.0;
        break;
      case ColumnKind::categorical: {
        const double u = stream.next_unit();
        double cum = 0.0;
        size_t pick = m.levels.size() - 1;
        for (size_t k = 0; k < m.level_probs.size(); ++k) {
          cum += m.level_probs[k];
          if (u < cum) {
            pick = k;
            break;
          }
        }
        for (size_t k = 1; k < m.levels.size(); ++k) {
          row[col++] = pick == k ? 1.0 : 0.0;
        }
        break;
      }
    }
  }
}

}  // namespace

MarginalSpec MarginalSpec::normal(std::string name, double mean, double sd) {
  MarginalSpec m;
  m.kind = ColumnKind::continuous;
  m.name = std::move(name);
  m.mean = mean;
  m.sd = sd;
  return m;
}

MarginalSpec MarginalSpec::bernoulli(std::string name, double prob) {
  MarginalSpec m;
  m.kind = ColumnKind::binary;
  m.name = std::move(name);
  m.prob = prob;
  return m;
}

MarginalSpec MarginalSpec::categorical(std::string name, std::vector<std::string> levels,
                                       std::vector<double> level_probs) {
  MarginalSpec m;
  m.kind = ColumnKind::categorical;
  m.name = std::move(name);
  m.levels = std::move(levels);
  m.level_probs = std::move(level_probs);
  return m;
}

Eigen::Index encoded_width(const std::vector<MarginalSpec>& marginals) {
  Eigen::Index width = 0;
  for (const auto& m : marginals) {
    width += m.kind == ColumnKind::categorical
                 ? static_cast<Eigen::Index>(m.levels.size()) - 1
                 : 1;
  }
  return width;
}

Dataset generate(const GeneratorSpec& spec) {
  validate_marginals(spec.marginals);
  const Eigen::Index p = 1 + encoded_width(spec.marginals);
  if (spec.theta_true.size() != p) {
    throw ValidationError("generator: theta_true needs " + std::to_string(p) +
                          " entries (intercept plus encoded columns), got " +
                          std::to_string(spec.theta_true.size()));
  }
  if (!spec.theta_true.allFinite()) {
    throw ValidationError("generator: theta_true must be finite");
  }
  if (spec.n < 1) throw ValidationError("generator: need n >= 1");

  // Schema and encoding map mirroring what a CSV load would produce.
  std::vector<ColumnSpec> specs;
  specs.push_back({"outcome", ColumnKind::binary, ColumnRole::outcome, {}});
  std::vector<CategoricalEncoding> encodings;
  std::vector<std::string> design_names{"(intercept)"};
  {
    Eigen::Index col = 1;
    for (const auto& m : spec.marginals) {
      specs.push_back({m.name, m.kind, ColumnRole::predictor, m.levels});
      if (m.kind == ColumnKind::categorical) {
        encodings.push_back({m.name, m.levels, col});
        for (size_t k = 1; k < m.levels.size(); ++k) {
          design_names.push_back(m.name + "=" + m.levels[k]);
        }
        col += static_cast<Eigen::Index>(m.levels.size()) - 1;
      } else {
        design_names.push_back(m.name);
        ++col;
      }
    }
  }

  Stream cov_stream(spec.rng, spec.draw_id, Phase::synth_covariates);
  Stream out_stream(spec.rng, spec.draw_id, Phase::synth_outcomes);
  for (int attempt = 0; attempt < 100; ++attempt) {
    Eigen::MatrixXd x(spec.n, p);
    x.col(0).setOnes();
    for (Eigen::Index r = 0; r < spec.n; ++r) {
      draw_row(spec.marginals, cov_stream, x.row(r).rightCols(p - 1));
    }
    Eigen::VectorXd y(spec.n);
    bool any0 = false, any1 = false;
    const Eigen::VectorXd eta = x * spec.theta_true;
    for (Eigen::Index r = 0; r < spec.n; ++r) {
      const bool event = out_stream.next_bernoulli(logistic(eta[r]));
      y[r] = event ? 1.0 : 0.0;
      (event ? any1 : any0) = true;
    }
    if (any0 && any1) {
      return Dataset::from_encoded(std::move(x), std::move(y), specs, encodings,
                                   design_names);
    }
  }
  throw ValidationError(
      "generator: single outcome class in 100 consecutive draws; the specified "
      "world is too extreme to yield usable samples");
}

NbTable true_nb_oracle(const GeneratorSpec& spec, const Coefficients& decision_model,
                       const ThresholdGrid& grid, Eigen::Index n_mc, ThresholdRule rule) {
  validate_marginals(spec.marginals);
  const Eigen::Index p = 1 + encoded_width(spec.marginals);
  if (spec.theta_true.size() != p) {
    throw ValidationError("oracle: theta_true length does not match marginals");
  }
  if (decision_model.beta.size() != p) {
    throw ValidationError("oracle: decision model length does not match marginals");
  }
  if (n_mc < 100000) {
    throw ValidationError("oracle: need at least 100000 Monte Carlo draws");
  }

  const Eigen::Index nz = grid.size();
  Eigen::ArrayXd sum_model = Eigen::ArrayXd::Zero(nz), sumsq_model = sum_model;
  Eigen::ArrayXd sum_all = sum_model, sumsq_all = sum_model;
  Eigen::ArrayXd sum_perfect = sum_model, sumsq_perfect = sum_model;
  Eigen::ArrayXd ratio(nz);
  for (Eigen::Index i = 0; i < nz; ++i) ratio[i] = harm_ratio(grid[i]);

  Stream stream(spec.rng, spec.draw_id, Phase::oracle_covariates);
  Eigen::RowVectorXd row(p);
  row[0] = 1.0;
  for (Eigen::Index it = 0; it < n_mc; ++it) {
    draw_row(spec.marginals, stream, row.rightCols(p - 1));
    const double pi = logistic(row.dot(spec.theta_true));
    const double dr = logistic(row.dot(decision_model.beta));
    for (Eigen::Index i = 0; i < nz; ++i) {
      const double z = grid[i];
      const double gain = pi - (1.0 - pi) * ratio[i];
      sum_all[i] += gain;
      sumsq_all[i] += gain * gain;
      const bool treat_model = rule == ThresholdRule::non_strict ? dr >= z : dr > z;
      const bool treat_perfect = rule == ThresholdRule::non_strict ? pi >= z : pi > z;
      if (treat_model) {
        sum_model[i] += gain;
        sumsq_model[i] += gain * gain;
      }
      if (treat_perfect) {
        sum_perfect[i] += gain;
        sumsq_perfect[i] += gain * gain;
      }
    }
  }

  const auto finish = [n_mc](const Eigen::ArrayXd& sum, const Eigen::ArrayXd& sumsq,
                             Eigen::ArrayXd& mean, Eigen::ArrayXd& se) {
    const double m = static_cast<double>(n_mc);
    mean = sum / m;
    se = (((sumsq - m * mean.square()) / (m - 1.0)).max(0.0) / m).sqrt();
  };
  NbTable table;
  table.z = grid.values();
  finish(sum_model, sumsq_model, table.nb_model, table.se_model);
  finish(sum_all, sumsq_all, table.nb_all, table.se_all);
  finish(sum_perfect, sumsq_perfect, table.nb_perfect, table.se_perfect);
  return table;
}

}  // namespace nbvoi
