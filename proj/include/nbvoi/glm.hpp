#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

#include "nbvoi/dataset.hpp"
#include "nbvoi/weights.hpp"

namespace nbvoi {

// Fitted logistic-regression parameters, intercept first.
struct Coefficients {
  Eigen::VectorXd beta;
  bool converged = false;
  int iterations = 0;
  double ridge_lambda_used = 0.0;
};

struct FitOptions {
  int max_iter = 50;
  double score_tol = 1e-8;
  // Starting ridge penalty. On non-convergence the fit retries with the
  // remaining rungs of the ladder {1e-6, 1e-4, 1e-2}; the rung that
  // converged is reported in Coefficients::ridge_lambda_used.
  double ridge_lambda = 0.0;
  // Risk clip applied only inside the IRLS working weights (and by
  // predict_risk to its output), never to the score.
  double min_risk_clip = 1e-12;
};

// Fit failure after the full ridge ladder, or a weighting that leaves one
// outcome class with zero total weight. Carries the last iterate.
class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, Coefficients last)
      : std::runtime_error(what), last_iterate(std::move(last)) {}

  Coefficients last_iterate;
};

// Weighted log-likelihood sum_j w_j [y_j eta_j - log(1 + exp(eta_j))],
// evaluated with the stable softplus form.
double weighted_log_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& w, const Eigen::VectorXd& beta);

// Newton/IRLS fit of a weighted logistic regression. Converges when the
// penalized score ||X'(w .* (y - pi)) - lambda beta||_inf falls to
// score_tol; with lambda = 0 this is the exact maximum-likelihood score
// equation. The normal equations are solved by an LDLT factorization of
// X'WX + lambda I with a 1e-12 diagonal jitter retry on failure.
Coefficients fit_weighted_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& w, const FitOptions& opts = {});

Coefficients fit_weighted_logistic(const Dataset& d, const WeightVector& w,
                                   const FitOptions& opts = {});

// Predicted risks logistic(x beta), clipped into [clip, 1 - clip].
Eigen::VectorXd predict_risk(const Coefficients& c, const Eigen::MatrixXd& x_rows,
                             double clip = 1e-12);

}  // namespace nbvoi
