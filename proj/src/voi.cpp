#include "nbvoi/voi.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "nbvoi/errors.hpp"

namespace nbvoi {

namespace {

// Iterations are processed in fixed blocks of this size; each block's
// partial sums are accumulated sequentially by whichever thread claims it,
// then merged in block order. Results are therefore independent of the
// thread count and of claim order.
constexpr std::int64_t kBlock = 256;

Eigen::ArrayXd zeros(Eigen::Index n) { return Eigen::ArrayXd::Zero(n); }

double sd_of_mean(double sum, double sumsq, double m) {
  const double mean = sum / m;
  const double var = std::max(0.0, (sumsq - m * mean * mean) / (m - 1.0));
  return std::sqrt(var / m);
}

}  // namespace

RecordAccumulator::RecordAccumulator(Eigen::Index n_thresholds, Eigen::Index n_future_sizes,
                                     Estimator estimator)
    : nz_(n_thresholds), nk_(n_future_sizes), estimator_(estimator) {
  sum_cur_model_ = zeros(nz_);
  sumsq_cur_model_ = zeros(nz_);
  sum_cur_all_ = zeros(nz_);
  sumsq_cur_all_ = zeros(nz_);
  sum_cur_perfect_ = zeros(nz_);
  sumsq_cur_perfect_ = zeros(nz_);
  sum_fut_model_.assign(static_cast<size_t>(nk_), zeros(nz_));
  sumsq_fut_model_.assign(static_cast<size_t>(nk_), zeros(nz_));
  sum_fut_all_.assign(static_cast<size_t>(nk_), zeros(nz_));
  sumsq_fut_all_.assign(static_cast<size_t>(nk_), zeros(nz_));
  if (estimator_ == Estimator::winner_per_draw) {
    sum_fut_winner_.assign(static_cast<size_t>(nk_), zeros(nz_));
    sumsq_fut_winner_.assign(static_cast<size_t>(nk_), zeros(nz_));
    winner_counts_.assign(
        static_cast<size_t>(nk_),
        {Eigen::ArrayX<std::int64_t>::Zero(nz_), Eigen::ArrayX<std::int64_t>::Zero(nz_),
         Eigen::ArrayX<std::int64_t>::Zero(nz_)});
  }
}

void RecordAccumulator::add(const IterationRecord& rec) {
  if (rec.degenerate) {
    ++degenerate_;
    return;
  }
  if (rec.cur_model.size() != nz_ ||
      static_cast<Eigen::Index>(rec.fut_model.size()) != nk_) {
    throw ValidationError("accumulator: record shape mismatch");
  }
  ++usable_;
  ridge_fallback_ += rec.ridge_fallback_fits;
  sum_cur_model_ += rec.cur_model;
  sumsq_cur_model_ += rec.cur_model.square();
  sum_cur_all_ += rec.cur_all;
  sumsq_cur_all_ += rec.cur_all.square();
  sum_cur_perfect_ += rec.cur_perfect;
  sumsq_cur_perfect_ += rec.cur_perfect.square();
  for (size_t k = 0; k < static_cast<size_t>(nk_); ++k) {
    sum_fut_model_[k] += rec.fut_model[k];
    sumsq_fut_model_[k] += rec.fut_model[k].square();
    sum_fut_all_[k] += rec.fut_all[k];
    sumsq_fut_all_[k] += rec.fut_all[k].square();
    if (estimator_ == Estimator::winner_per_draw) {
      for (Eigen::Index i = 0; i < nz_; ++i) {
        const int w = pick_winner(0.0, rec.plug_model[k][i], rec.plug_all[k][i]);
        const double v =
            w == 0 ? 0.0 : (w == 1 ? rec.fut_model[k][i] : rec.fut_all[k][i]);
        sum_fut_winner_[k][i] += v;
        sumsq_fut_winner_[k][i] += v * v;
        ++winner_counts_[k][static_cast<size_t>(w)][i];
      }
    }
  }
}

void RecordAccumulator::merge(const RecordAccumulator& other) {
  if (other.nz_ != nz_ || other.nk_ != nk_ || other.estimator_ != estimator_) {
    throw ValidationError("accumulator: merge shape mismatch");
  }
  usable_ += other.usable_;
  degenerate_ += other.degenerate_;
  ridge_fallback_ += other.ridge_fallback_;
  sum_cur_model_ += other.sum_cur_model_;
  sumsq_cur_model_ += other.sumsq_cur_model_;
  sum_cur_all_ += other.sum_cur_all_;
  sumsq_cur_all_ += other.sumsq_cur_all_;
  sum_cur_perfect_ += other.sum_cur_perfect_;
  sumsq_cur_perfect_ += other.sumsq_cur_perfect_;
  for (size_t k = 0; k < static_cast<size_t>(nk_); ++k) {
    sum_fut_model_[k] += other.sum_fut_model_[k];
    sumsq_fut_model_[k] += other.sumsq_fut_model_[k];
    sum_fut_all_[k] += other.sum_fut_all_[k];
    sumsq_fut_all_[k] += other.sumsq_fut_all_[k];
    if (estimator_ == Estimator::winner_per_draw) {
      sum_fut_winner_[k] += other.sum_fut_winner_[k];
      sumsq_fut_winner_[k] += other.sumsq_fut_winner_[k];
      for (size_t s = 0; s < 3; ++s) winner_counts_[k][s] += other.winner_counts_[k][s];
    }
  }
}

const Eigen::ArrayXd& RecordAccumulator::sum_cur(int strategy) const {
  if (strategy == 1) return sum_cur_model_;
  if (strategy == 2) return sum_cur_all_;
  throw ValidationError("accumulator: strategy must be 1 (model) or 2 (all)");
}

const Eigen::ArrayXd& RecordAccumulator::sumsq_cur(int strategy) const {
  if (strategy == 1) return sumsq_cur_model_;
  if (strategy == 2) return sumsq_cur_all_;
  throw ValidationError("accumulator: strategy must be 1 (model) or 2 (all)");
}

const Eigen::ArrayXd& RecordAccumulator::sum_fut(Eigen::Index k, int strategy) const {
  const auto& v = strategy == 1 ? sum_fut_model_ : sum_fut_all_;
  if (strategy != 1 && strategy != 2) {
    throw ValidationError("accumulator: strategy must be 1 (model) or 2 (all)");
  }
  return v.at(static_cast<size_t>(k));
}

const Eigen::ArrayXd& RecordAccumulator::sumsq_fut(Eigen::Index k, int strategy) const {
  const auto& v = strategy == 1 ? sumsq_fut_model_ : sumsq_fut_all_;
  if (strategy != 1 && strategy != 2) {
    throw ValidationError("accumulator: strategy must be 1 (model) or 2 (all)");
  }
  return v.at(static_cast<size_t>(k));
}

const Eigen::ArrayXd& RecordAccumulator::sum_fut_winner(Eigen::Index k) const {
  return sum_fut_winner_.at(static_cast<size_t>(k));
}

const Eigen::ArrayXd& RecordAccumulator::sumsq_fut_winner(Eigen::Index k) const {
  return sumsq_fut_winner_.at(static_cast<size_t>(k));
}

IterationRecord run_iteration(const Dataset& d, const Coefficients& theta_hat,
                              const VoiConfig& cfg, std::uint64_t t) {
  const Eigen::Index n = d.n();
  const size_t nk = cfg.future_sizes.size();
  const bool per_draw = cfg.estimator == Estimator::winner_per_draw;
  const bool merged_ep = cfg.evaluation_population == EvalPopulation::merged_sample;

  IterationRecord rec;
  rec.fut_model.resize(nk);
  rec.fut_all.resize(nk);
  if (per_draw) {
    rec.plug_model.resize(nk);
    rec.plug_all.resize(nk);
  }

  // This draw's generating population: case-mix weights plus the weighted
  // refit that plays the role of the true coefficient vector.
  Stream weight_stream(cfg.rng, t, Phase::outer_weights);
  const WeightVector w = cfg.outer_scheme == OuterScheme::bayesian
                             ? bayesian_bootstrap_weights(n, weight_stream)
                             : ordinary_bootstrap_counts(n, weight_stream);
  Coefficients theta_t;
  try {
    theta_t = fit_weighted_logistic(d.x(), d.y(), w.w, cfg.fit);
  } catch (const FitError&) {
    rec.degenerate = true;
    return rec;
  }
  if (theta_t.ridge_lambda_used > cfg.fit.ridge_lambda) ++rec.ridge_fallback_fits;

  const Eigen::VectorXd true_risk_dev = predict_risk(theta_t, d.x());
  const Eigen::VectorXd decision_dev = predict_risk(theta_hat, d.x());
  const Eigen::VectorXd unit_dev = Eigen::VectorXd::Ones(n);
  const Eigen::VectorXd& cur_w = merged_ep ? unit_dev : w.w;

  rec.cur_model = nb_model_curve(decision_dev, true_risk_dev, cur_w, cfg.grid,
                                 cfg.inequality);
  rec.cur_all = nb_treat_all_curve(true_risk_dev, cur_w, cfg.grid);
  rec.cur_perfect = nb_perfect_curve(true_risk_dev, cur_w, cfg.grid, cfg.inequality);

  for (size_t k = 0; k < nk; ++k) {
    const Eigen::Index n_star = static_cast<Eigen::Index>(cfg.future_sizes[k]);
    if (n_star == 0) {
      // No future sample: the merged data are the development data and the
      // refit reproduces theta_hat, so the record is copied bit for bit.
      rec.fut_model[k] = rec.cur_model;
      rec.fut_all[k] = rec.cur_all;
      if (per_draw) {
        rec.plug_model[k] =
            empirical_nb_curve(decision_dev, d.y(), unit_dev, cfg.grid, cfg.inequality);
        rec.plug_all[k] = nb_treat_all_curve(d.y(), unit_dev, cfg.grid);
      }
      continue;
    }

    // Streams are re-derived per future size, so smaller sizes consume a
    // prefix of the draws made for larger ones.
    Stream index_stream(cfg.rng, t, Phase::future_indices);
    const std::vector<Eigen::Index> idx =
        draw_future_covariates(d, w, n_star, index_stream);
    Stream outcome_stream(cfg.rng, t, Phase::future_outcomes);
    const Eigen::VectorXd y_star = regenerate_outcomes(idx, true_risk_dev, outcome_stream);

    Eigen::MatrixXd x_merged(n + n_star, d.p());
    x_merged.topRows(n) = d.x();
    for (Eigen::Index i = 0; i < n_star; ++i) {
      x_merged.row(n + i) = d.x().row(idx[static_cast<size_t>(i)]);
    }
    Eigen::VectorXd y_merged(n + n_star);
    y_merged.head(n) = d.y();
    y_merged.tail(n_star) = y_star;
    const Eigen::VectorXd unit_merged = Eigen::VectorXd::Ones(n + n_star);

    Coefficients theta_plus;
    try {
      theta_plus = fit_weighted_logistic(x_merged, y_merged, unit_merged, cfg.fit);
    } catch (const FitError&) {
      rec.degenerate = true;
      return rec;
    }
    if (theta_plus.ridge_lambda_used > cfg.fit.ridge_lambda) ++rec.ridge_fallback_fits;

    const Eigen::VectorXd decision_merged = predict_risk(theta_plus, x_merged);
    if (merged_ep) {
      const Eigen::VectorXd eval_merged = predict_risk(theta_t, x_merged);
      rec.fut_model[k] = nb_model_curve(decision_merged, eval_merged, unit_merged,
                                        cfg.grid, cfg.inequality);
      rec.fut_all[k] = nb_treat_all_curve(eval_merged, unit_merged, cfg.grid);
    } else {
      const Eigen::VectorXd decision_dev_plus = predict_risk(theta_plus, d.x());
      rec.fut_model[k] = nb_model_curve(decision_dev_plus, true_risk_dev, w.w, cfg.grid,
                                        cfg.inequality);
      rec.fut_all[k] = rec.cur_all;  // same evaluation population and weights
    }
    if (per_draw) {
      // The per-draw winner can only see the merged data themselves.
      rec.plug_model[k] =
          empirical_nb_curve(decision_merged, y_merged, unit_merged, cfg.grid,
                             cfg.inequality);
      rec.plug_all[k] = nb_treat_all_curve(y_merged, unit_merged, cfg.grid);
    }
  }
  return rec;
}

EnbTable enb_current(const RecordAccumulator& acc, const ThresholdGrid& grid) {
  const double m = static_cast<double>(acc.usable());
  if (acc.usable() < 2) {
    throw ValidationError("expected net benefit: need at least two usable iterations");
  }
  if (grid.size() != acc.thresholds()) {
    throw ValidationError("expected net benefit: grid size mismatch");
  }
  EnbTable enb;
  enb.z = grid.values();
  enb.enb_model = acc.sum_cur(1) / m;
  enb.enb_all = acc.sum_cur(2) / m;
  enb.enb_perfect = acc.sum_cur_perfect() / m;
  const Eigen::Index nz = grid.size();
  enb.se_model = zeros(nz);
  enb.se_all = zeros(nz);
  enb.se_perfect = zeros(nz);
  for (Eigen::Index i = 0; i < nz; ++i) {
    enb.se_model[i] = sd_of_mean(acc.sum_cur(1)[i], acc.sumsq_cur(1)[i], m);
    enb.se_all[i] = sd_of_mean(acc.sum_cur(2)[i], acc.sumsq_cur(2)[i], m);
    enb.se_perfect[i] = sd_of_mean(acc.sum_cur_perfect()[i], acc.sumsq_cur_perfect()[i], m);
  }
  return enb;
}

int pick_winner(double enb_none, double enb_model, double enb_all) {
  if (!std::isfinite(enb_none) || !std::isfinite(enb_model) || !std::isfinite(enb_all)) {
    throw ValidationError("winner: non-finite expected net benefit");
  }
  int best = 0;
  double best_value = enb_none;
  if (enb_model > best_value) {
    best = 1;
    best_value = enb_model;
  }
  if (enb_all > best_value) best = 2;
  return best;
}

Eigen::ArrayXd compute_evpi(const EnbTable& enb) {
  return enb.enb_perfect - enb.enb_model.max(enb.enb_all).max(0.0);
}

VoiResult compute_evsi(const RecordAccumulator& acc, const EnbTable& enb,
                       const VoiConfig& cfg) {
  if (static_cast<size_t>(acc.future_sizes()) != cfg.future_sizes.size()) {
    throw ValidationError("sample information: future size records missing");
  }
  const double m = static_cast<double>(acc.usable());
  const Eigen::Index nz = acc.thresholds();
  const size_t nk = cfg.future_sizes.size();

  VoiResult res;
  res.enb = enb;
  res.evpi = compute_evpi(enb);
  res.future_sizes = cfg.future_sizes;
  res.winner_current.resize(static_cast<size_t>(nz));
  for (Eigen::Index i = 0; i < nz; ++i) {
    res.winner_current[static_cast<size_t>(i)] =
        pick_winner(0.0, enb.enb_model[i], enb.enb_all[i]);
  }

  const Eigen::ArrayXd enb_winner = enb.enb_model.max(enb.enb_all).max(0.0);
  res.evsi_raw.assign(nk, zeros(nz));
  res.evsi_clamped.assign(nk, zeros(nz));
  res.evsi_mc_se.assign(nk, zeros(nz));
  for (size_t k = 0; k < nk; ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    if (cfg.estimator == Estimator::winner_after_average) {
      const Eigen::ArrayXd fut_model = acc.sum_fut(ki, 1) / m;
      const Eigen::ArrayXd fut_all = acc.sum_fut(ki, 2) / m;
      res.evsi_raw[k] = fut_model.max(fut_all).max(0.0) - enb_winner;
      for (Eigen::Index i = 0; i < nz; ++i) {
        const int w = pick_winner(0.0, fut_model[i], fut_all[i]);
        res.evsi_mc_se[k][i] =
            w == 0 ? 0.0 : sd_of_mean(acc.sum_fut(ki, w)[i], acc.sumsq_fut(ki, w)[i], m);
      }
    } else {
      res.evsi_raw[k] = acc.sum_fut_winner(ki) / m - enb_winner;
      for (Eigen::Index i = 0; i < nz; ++i) {
        res.evsi_mc_se[k][i] =
            sd_of_mean(acc.sum_fut_winner(ki)[i], acc.sumsq_fut_winner(ki)[i], m);
      }
    }
    res.evsi_clamped[k] = res.evsi_raw[k].max(0.0);
  }
  if (cfg.estimator == Estimator::winner_per_draw) {
    res.winner_frequencies = acc.winner_counts();
  }
  return res;
}

VoiResult run_voi(const Dataset& d, const VoiConfig& cfg, int threads) {
  if (cfg.iterations < 2) throw ValidationError("engine: need at least two iterations");
  for (const auto n_star : cfg.future_sizes) {
    if (n_star < 0) throw ValidationError("engine: future sizes must be >= 0");
  }
  if (!(cfg.max_degenerate_fraction >= 0.0 && cfg.max_degenerate_fraction <= 1.0)) {
    throw ValidationError("engine: max_degenerate_fraction must lie in [0, 1]");
  }

  const Coefficients theta_hat = fit_weighted_logistic(d, WeightVector::uniform(d.n()),
                                                       cfg.fit);
  const std::int64_t total = cfg.iterations;
  const std::int64_t nblocks = (total + kBlock - 1) / kBlock;
  const Eigen::Index nz = cfg.grid.size();
  const auto nk = static_cast<Eigen::Index>(cfg.future_sizes.size());

  std::vector<RecordAccumulator> blocks(static_cast<size_t>(nblocks),
                                        RecordAccumulator(nz, nk, cfg.estimator));
  Eigen::MatrixXd increments;
  if (cfg.keep_increments) increments.setZero(total, nz);

  std::atomic<std::int64_t> next_block{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto worker = [&] {
    try {
      for (;;) {
        if (failed.load(std::memory_order_relaxed)) return;
        const std::int64_t b = next_block.fetch_add(1, std::memory_order_relaxed);
        if (b >= nblocks) return;
        const std::int64_t t_end = std::min(total, (b + 1) * kBlock);
        for (std::int64_t t = b * kBlock + 1; t <= t_end; ++t) {
          const IterationRecord rec =
              run_iteration(d, theta_hat, cfg, static_cast<std::uint64_t>(t));
          blocks[static_cast<size_t>(b)].add(rec);
          if (cfg.keep_increments) {
            if (rec.degenerate) {
              increments.row(t - 1).setConstant(std::numeric_limits<double>::quiet_NaN());
            } else {
              increments.row(t - 1) =
                  (rec.cur_model - rec.cur_all.max(0.0)).matrix().transpose();
            }
          }
        }
      }
    } catch (...) {
      const std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
      failed.store(true, std::memory_order_relaxed);
    }
  };

  int n_threads = threads <= 0 ? static_cast<int>(std::thread::hardware_concurrency())
                               : threads;
  n_threads = std::max(1, std::min<int>(n_threads, static_cast<int>(nblocks)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  RecordAccumulator acc(nz, nk, cfg.estimator);
  for (const auto& block : blocks) acc.merge(block);

  const auto degenerate = acc.degenerate();
  if (degenerate > 0 &&
      static_cast<double>(degenerate) >=
          cfg.max_degenerate_fraction * static_cast<double>(total)) {
    throw std::runtime_error("engine: " + std::to_string(degenerate) + " of " +
                             std::to_string(total) +
                             " iterations were degenerate; result would be biased");
  }

  const EnbTable enb = enb_current(acc, cfg.grid);
  VoiResult res = compute_evsi(acc, enb, cfg);
  res.diagnostics.usable_iterations = acc.usable();
  res.diagnostics.degenerate_iterations = degenerate;
  res.diagnostics.ridge_fallback_fits = acc.ridge_fallback_fits();
  res.increments = std::move(increments);
  return res;
}

PopulationImpact scale_to_population(double per_decision_value, double annual_decisions,
                                     double z) {
  if (!(z > 0.0 && z < 1.0)) {
    throw ValidationError("population scaling: threshold must lie inside (0, 1)");
  }
  if (!(annual_decisions >= 0.0)) {
    throw ValidationError("population scaling: annual decision count must be >= 0");
  }
  PopulationImpact impact;
  impact.net_tp_per_year = per_decision_value * annual_decisions;
  impact.fp_averted_per_year = impact.net_tp_per_year * (1.0 - z) / z;
  return impact;
}

}  // namespace nbvoi
