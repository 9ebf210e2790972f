#pragma once

#include <Eigen/Dense>

namespace nbvoi {

enum class WeightForm { dirichlet, counts, uniform };

// Per-row nonnegative case weights. The dirichlet form is normalized to sum
// to one; the counts form holds nonnegative integers summing to the resample
// size; the uniform form is all ones. Every consumer normalizes by the total,
// so the forms are interchangeable where only relative weight matters.
struct WeightVector {
  Eigen::VectorXd w;
  WeightForm form = WeightForm::uniform;

  Eigen::Index size() const { return w.size(); }
  double total() const { return w.sum(); }

  static WeightVector uniform(Eigen::Index n) {
    return WeightVector{Eigen::VectorXd::Ones(n), WeightForm::uniform};
  }
};

}  // namespace nbvoi
