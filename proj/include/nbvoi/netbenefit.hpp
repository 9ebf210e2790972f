#pragma once

#include <Eigen/Dense>
#include <vector>

#include "nbvoi/errors.hpp"

namespace nbvoi {

// Treatment rule at the threshold: treat when risk >= z (non_strict, the
// default) or risk > z. Ties at the threshold are indifferent in utility
// terms, so either convention is valid; one must be fixed and is
// configurable everywhere it matters.
enum class ThresholdRule { non_strict, strict };

// Strictly increasing thresholds, all inside (0, 1) so the false-positive
// exchange rate z/(1-z) stays finite and positive.
class ThresholdGrid {
 public:
  explicit ThresholdGrid(std::vector<double> z_values);

  // The conventional percent grid 0.01, 0.02, ..., 0.99.
  static ThresholdGrid percent_grid();
  // lo, lo+step, ... up to hi inclusive (within half a step).
  static ThresholdGrid regular(double lo, double hi, double step);

  const std::vector<double>& values() const { return z_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(z_.size()); }
  double operator[](Eigen::Index i) const { return z_[static_cast<size_t>(i)]; }

 private:
  std::vector<double> z_;
};

inline double harm_ratio(double z) { return z / (1.0 - z); }

// Net benefit of treating everyone: sum_j w_j [pi_j - (1-pi_j) z/(1-z)]
// normalized by the total weight.
double nb_treat_all(const Eigen::Ref<const Eigen::VectorXd>& eval_risks,
                    const Eigen::Ref<const Eigen::VectorXd>& w, double z);

// Net benefit of treating by model decisions: rows with decision risk at or
// above z contribute pi_j - (1-pi_j) z/(1-z) under the evaluation risks.
double nb_model(const Eigen::Ref<const Eigen::VectorXd>& decision_risks,
                const Eigen::Ref<const Eigen::VectorXd>& eval_risks,
                const Eigen::Ref<const Eigen::VectorXd>& w, double z,
                ThresholdRule rule = ThresholdRule::non_strict);

// Net benefit when decisions threshold the evaluation risks themselves; the
// per-row optimum, so it dominates every other strategy at the same truth.
double nb_perfect(const Eigen::Ref<const Eigen::VectorXd>& eval_risks,
                  const Eigen::Ref<const Eigen::VectorXd>& w, double z,
                  ThresholdRule rule = ThresholdRule::non_strict);

// Plug-in net benefit with observed outcomes in place of risks:
// [sum_treated w_j y_j - z/(1-z) sum_treated w_j (1-y_j)] / sum w.
double empirical_nb(const Eigen::Ref<const Eigen::VectorXd>& decision_risks,
                    const Eigen::Ref<const Eigen::VectorXd>& y,
                    const Eigen::Ref<const Eigen::VectorXd>& w, double z,
                    ThresholdRule rule = ThresholdRule::non_strict);

// Whole-grid evaluations of the kernels above. One sort of the decision
// risks plus prefix sums replaces a per-threshold scan; values agree with
// the per-z kernels up to summation order (tested to 1e-12).
Eigen::ArrayXd nb_model_curve(const Eigen::Ref<const Eigen::VectorXd>& decision_risks,
                              const Eigen::Ref<const Eigen::VectorXd>& eval_risks,
                              const Eigen::Ref<const Eigen::VectorXd>& w,
                              const ThresholdGrid& grid,
                              ThresholdRule rule = ThresholdRule::non_strict);
Eigen::ArrayXd nb_treat_all_curve(const Eigen::Ref<const Eigen::VectorXd>& eval_risks,
                                  const Eigen::Ref<const Eigen::VectorXd>& w,
                                  const ThresholdGrid& grid);
Eigen::ArrayXd nb_perfect_curve(const Eigen::Ref<const Eigen::VectorXd>& eval_risks,
                                const Eigen::Ref<const Eigen::VectorXd>& w,
                                const ThresholdGrid& grid,
                                ThresholdRule rule = ThresholdRule::non_strict);
Eigen::ArrayXd empirical_nb_curve(const Eigen::Ref<const Eigen::VectorXd>& decision_risks,
                                  const Eigen::Ref<const Eigen::VectorXd>& y,
                                  const Eigen::Ref<const Eigen::VectorXd>& w,
                                  const ThresholdGrid& grid,
                                  ThresholdRule rule = ThresholdRule::non_strict);

// Per-threshold net benefit of the three strategies plus the
// perfect-information benchmark, in net true positives per decision.
// nb_none is identically zero and therefore not stored. The se_* arrays are
// filled by Monte Carlo producers (see synth::true_nb_oracle) and left empty
// otherwise.
struct NbTable {
  std::vector<double> z;
  Eigen::ArrayXd nb_model;
  Eigen::ArrayXd nb_all;
  Eigen::ArrayXd nb_perfect;
  Eigen::ArrayXd se_model;
  Eigen::ArrayXd se_all;
  Eigen::ArrayXd se_perfect;
};

}  // namespace nbvoi
