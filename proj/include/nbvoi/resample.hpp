#pragma once

#include <Eigen/Dense>
#include <vector>

#include "nbvoi/dataset.hpp"
#include "nbvoi/rng.hpp"
#include "nbvoi/weights.hpp"

namespace nbvoi {

// Dirichlet(1, ..., 1) weights: n standard-exponential draws in row order,
// normalized by their sum. Consumes exactly n uniforms from the stream.
WeightVector bayesian_bootstrap_weights(Eigen::Index n, Stream& stream);

// Multinomial(n; 1/n, ..., 1/n) resample counts. Consumes exactly n
// uniforms, one per drawn index.
WeightVector ordinary_bootstrap_counts(Eigen::Index n, Stream& stream);

// n_star row indices drawn i.i.d. from the categorical distribution with
// probabilities proportional to w (counts form included). Each draw consumes
// one uniform u; the selected row is the first whose cumulative weight
// exceeds u * total. Rows with zero weight are never selected.
std::vector<Eigen::Index> draw_future_covariates(const Dataset& d, const WeightVector& w,
                                                 Eigen::Index n_star, Stream& stream);

// Bernoulli outcomes for the drawn rows: y_i ~ Bernoulli(true_risks[indices[i]])
// in draw order, one uniform each. Risks must lie in [0, 1].
Eigen::VectorXd regenerate_outcomes(const std::vector<Eigen::Index>& indices,
                                    const Eigen::Ref<const Eigen::VectorXd>& true_risks,
                                    Stream& stream);

}  // namespace nbvoi
