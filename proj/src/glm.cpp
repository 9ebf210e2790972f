#include "nbvoi/glm.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

#include "nbvoi/errors.hpp"

namespace nbvoi {

namespace {

// log(1 + exp(t)) without overflow in either tail.
double softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double logistic(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

void check_fit_inputs(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& w, const FitOptions& opts) {
  if (y.size() != x.rows() || w.size() != x.rows()) {
    throw ValidationError("fit: row count mismatch between design, outcome, weights");
  }
  if (x.rows() == 0 || x.cols() == 0) throw ValidationError("fit: empty design matrix");
  if (opts.max_iter < 1 || !(opts.score_tol > 0.0)) {
    throw ValidationError("fit: max_iter must be >= 1 and score_tol > 0");
  }
  if (!(opts.ridge_lambda >= 0.0)) throw ValidationError("fit: ridge_lambda must be >= 0");
  if ((w.array() < 0.0).any()) throw ValidationError("fit: negative weight");
  if (!(w.sum() > 0.0)) throw ValidationError("fit: total weight must be positive");
}

struct RungOutcome {
  Coefficients coef;
  bool ok = false;
};

// One IRLS run at a fixed penalty. Fails (ok = false) on iteration
// exhaustion, an unusable linear solve, a stalled line search, or, for the
// unpenalized rung, convergence onto saturated fitted probabilities on
// positively weighted rows, which is how separation manifests after the
// score has underflowed.
RungOutcome irls_rung(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& w, const FitOptions& opts, double lambda) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const double clip = opts.min_risk_clip;

  RungOutcome out;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd pi(n), s(n), score(p), delta(p);

  auto penalized_nll = [&](const Eigen::VectorXd& b, const Eigen::VectorXd& e) {
    double ll = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) ll += w[j] * (y[j] * e[j] - softplus(e[j]));
    return -ll + 0.5 * lambda * b.squaredNorm();
  };

  double pnll = penalized_nll(beta, eta);
  int iter = 0;
  for (;; ++iter) {
    for (Eigen::Index j = 0; j < n; ++j) pi[j] = logistic(eta[j]);
    score.noalias() = x.transpose() * (w.array() * (y - pi).array()).matrix();
    score -= lambda * beta;
    if (score.lpNorm<Eigen::Infinity>() <= opts.score_tol) {
      if (lambda == 0.0) {
        // Separation makes the score vanish by saturation instead of at an
        // interior optimum: some positively weighted row is fitted onto its
        // own outcome with a probability pinned against 0 or 1. Send such
        // fits to the ridge ladder rather than returning a drifting iterate.
        const double sat = std::min(1e-6, 10.0 * opts.score_tol);
        for (Eigen::Index j = 0; j < n; ++j) {
          if (w[j] > 0.0 && std::min(pi[j], 1.0 - pi[j]) <= sat &&
              std::abs(y[j] - pi[j]) <= sat) {
            out.coef = {beta, false, iter, lambda};
            return out;
          }
        }
      }
      out.coef = {beta, true, iter, lambda};
      out.ok = true;
      return out;
    }
    if (iter >= opts.max_iter) break;

    for (Eigen::Index j = 0; j < n; ++j) {
      const double pc = std::min(std::max(pi[j], clip), 1.0 - clip);
      s[j] = w[j] * pc * (1.0 - pc);
    }
    Eigen::MatrixXd h = x.transpose() * s.asDiagonal() * x;
    h.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    delta = ldlt.solve(score);
    if (!delta.allFinite()) {
      h.diagonal().array() += 1e-12;
      ldlt.compute(h);
      delta = ldlt.solve(score);
      if (!delta.allFinite()) break;
    }

    // Newton step with halving against the penalized objective. The slack
    // covers the convergence tail, where the true decrease of the final
    // steps falls below the objective's floating-point resolution and would
    // otherwise be rejected as a spurious sub-ulp increase.
    const double slack = 1e-10 * (1.0 + std::abs(pnll));
    double step = 1.0;
    bool improved = false;
    Eigen::VectorXd beta_try(p), eta_try(n);
    for (int half = 0; half < 40; ++half, step *= 0.5) {
      beta_try = beta + step * delta;
      eta_try.noalias() = x * beta_try;
      const double pnll_try = penalized_nll(beta_try, eta_try);
      if (std::isfinite(pnll_try) && pnll_try <= pnll + slack) {
        beta.swap(beta_try);
        eta.swap(eta_try);
        pnll = pnll_try;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  out.coef = {beta, false, iter, lambda};
  return out;
}

}  // namespace

double weighted_log_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& w, const Eigen::VectorXd& beta) {
  if (beta.size() != x.cols()) throw ValidationError("log-likelihood: beta length mismatch");
  if (y.size() != x.rows() || w.size() != x.rows()) {
    throw ValidationError("log-likelihood: row count mismatch");
  }
  const Eigen::VectorXd eta = x * beta;
  double ll = 0.0;
  for (Eigen::Index j = 0; j < x.rows(); ++j) {
    ll += w[j] * (y[j] * eta[j] - softplus(eta[j]));
  }
  return ll;
}

Coefficients fit_weighted_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& w, const FitOptions& opts) {
  check_fit_inputs(x, y, w, opts);
  const double events = w.dot(y);
  if (!(events > 0.0) || !(w.sum() - events > 0.0)) {
    throw FitError("fit: one outcome class has zero total weight",
                   {Eigen::VectorXd::Zero(x.cols()), false, 0, opts.ridge_lambda});
  }

  // The requested penalty first, then the remaining rungs of the fallback
  // ladder in increasing strength.
  std::vector<double> rungs{opts.ridge_lambda};
  for (const double rung : {1e-6, 1e-4, 1e-2}) {
    if (rung > opts.ridge_lambda) rungs.push_back(rung);
  }

  RungOutcome last;
  for (const double lambda : rungs) {
    last = irls_rung(x, y, w, opts, lambda);
    if (last.ok) return last.coef;
  }
  throw FitError("fit: no convergence after the ridge fallback ladder", last.coef);
}

Coefficients fit_weighted_logistic(const Dataset& d, const WeightVector& w,
                                   const FitOptions& opts) {
  return fit_weighted_logistic(d.x(), d.y(), w.w, opts);
}

Eigen::VectorXd predict_risk(const Coefficients& c, const Eigen::MatrixXd& x_rows,
                             double clip) {
  if (c.beta.size() != x_rows.cols()) {
    throw ValidationError("predict: design has " + std::to_string(x_rows.cols()) +
                          " columns but model has " + std::to_string(c.beta.size()) +
                          " coefficients");
  }
  Eigen::VectorXd risk = x_rows * c.beta;
  for (Eigen::Index j = 0; j < risk.size(); ++j) {
    risk[j] = std::min(std::max(logistic(risk[j]), clip), 1.0 - clip);
  }
  return risk;
}

}  // namespace nbvoi
