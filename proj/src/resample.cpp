#include "nbvoi/resample.hpp"

#include <algorithm>

#include "nbvoi/errors.hpp"

namespace nbvoi {

WeightVector bayesian_bootstrap_weights(Eigen::Index n, Stream& stream) {
  if (n < 1) throw ValidationError("bootstrap weights: need n >= 1");
  Eigen::VectorXd w(n);
  for (Eigen::Index j = 0; j < n; ++j) w[j] = stream.next_exponential();
  w /= w.sum();
  return {std::move(w), WeightForm::dirichlet};
}

WeightVector ordinary_bootstrap_counts(Eigen::Index n, Stream& stream) {
  if (n < 1) throw ValidationError("bootstrap counts: need n >= 1");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    w[static_cast<Eigen::Index>(stream.next_index(static_cast<std::uint64_t>(n)))] += 1.0;
  }
  return {std::move(w), WeightForm::counts};
}

std::vector<Eigen::Index> draw_future_covariates(const Dataset& d, const WeightVector& w,
                                                 Eigen::Index n_star, Stream& stream) {
  const Eigen::Index n = d.n();
  if (w.size() != n) throw ValidationError("future draw: weight length mismatch");
  if (n_star < 1) throw ValidationError("future draw: need n_star >= 1");
  if ((w.w.array() < 0.0).any()) throw ValidationError("future draw: negative weight");

  // Cumulative weights built by sequential accumulation; this exact order is
  // part of the reproducibility contract.
  std::vector<double> cum(static_cast<size_t>(n));
  double run = 0.0;
  Eigen::Index last_positive = -1;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (w.w[j] > 0.0) last_positive = j;
    run += w.w[j];
    cum[static_cast<size_t>(j)] = run;
  }
  if (!(run > 0.0)) throw ValidationError("future draw: all weights are zero");

  std::vector<Eigen::Index> indices(static_cast<size_t>(n_star));
  for (auto& index : indices) {
    const double target = stream.next_unit() * run;
    // First row whose cumulative weight exceeds the target; zero-weight rows
    // repeat the previous cumulative value and can never be hit.
    const auto it = std::upper_bound(cum.begin(), cum.end(), target);
    index = it == cum.end() ? last_positive
                            : static_cast<Eigen::Index>(it - cum.begin());
  }
  return indices;
}

Eigen::VectorXd regenerate_outcomes(const std::vector<Eigen::Index>& indices,
                                    const Eigen::Ref<const Eigen::VectorXd>& true_risks,
                                    Stream& stream) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(indices.size()));
  Eigen::Index i = 0;
  for (const Eigen::Index index : indices) {
    if (index < 0 || index >= true_risks.size()) {
      throw ValidationError("outcome regeneration: index out of range");
    }
    const double risk = true_risks[index];
    if (!(risk >= 0.0 && risk <= 1.0)) {
      throw ValidationError("outcome regeneration: risk outside [0, 1]");
    }
    y[i++] = stream.next_bernoulli(risk) ? 1.0 : 0.0;
  }
  return y;
}

}  // namespace nbvoi
