#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "nbvoi/dataset.hpp"
#include "nbvoi/glm.hpp"
#include "nbvoi/netbenefit.hpp"
#include "nbvoi/rng.hpp"

namespace nbvoi {

// Marginal distribution of one covariate in the generating process.
// Continuous draws are normal(mean, sd); binary draws are Bernoulli(prob);
// categorical draws pick levels[k] with probability level_probs[k], the
// first level acting as the dummy-coding reference.
struct MarginalSpec {
  ColumnKind kind = ColumnKind::continuous;
  std::string name;
  double mean = 0.0;
  double sd = 1.0;
  double prob = 0.5;
  std::vector<std::string> levels;
  std::vector<double> level_probs;

  static MarginalSpec normal(std::string name, double mean, double sd);
  static MarginalSpec bernoulli(std::string name, double prob);
  static MarginalSpec categorical(std::string name, std::vector<std::string> levels,
                                  std::vector<double> level_probs);
};

// A fully known world to sample development data from: covariates drawn
// independently per marginal, outcomes Bernoulli(logistic(x . theta_true)).
// theta_true is laid out like a fitted coefficient vector: intercept first,
// then one entry per encoded design column in marginal order. draw_id keeps
// repeated draws from one spec on disjoint substreams.
struct GeneratorSpec {
  Eigen::VectorXd theta_true;
  std::vector<MarginalSpec> marginals;
  Eigen::Index n = 0;
  RngSpec rng;
  std::uint64_t draw_id = 0;
};

// Number of design columns the marginals encode to (excluding intercept).
Eigen::Index encoded_width(const std::vector<MarginalSpec>& marginals);

// Draws a development sample of spec.n rows. Covariates consume the
// synth_covariates stream row by row (a normal takes two uniforms, a
// Bernoulli or categorical takes one); outcomes consume the synth_outcomes
// stream, one Bernoulli per row. If a draw comes out with only one outcome
// class, the draw repeats on the same streams, up to 100 attempts.
Dataset generate(const GeneratorSpec& spec);

// Population net benefit of a fixed decision model under the known truth,
// estimated on a fresh n_mc-row Monte Carlo sample: eval risks come from
// spec.theta_true, treatment decisions from decision_model. Returns the
// model / treat-all / perfect curves with per-threshold Monte Carlo
// standard errors. Requires n_mc >= 100000.
NbTable true_nb_oracle(const GeneratorSpec& spec, const Coefficients& decision_model,
                       const ThresholdGrid& grid, Eigen::Index n_mc,
                       ThresholdRule rule = ThresholdRule::non_strict);

}  // namespace nbvoi
