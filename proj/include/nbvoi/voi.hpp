#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

#include "nbvoi/dataset.hpp"
#include "nbvoi/glm.hpp"
#include "nbvoi/netbenefit.hpp"
#include "nbvoi/resample.hpp"

namespace nbvoi {

enum class OuterScheme { bayesian, ordinary };

// How the winner enters the expected value of sample information. The
// engine averages net benefits first and then picks the winning strategy
// (winner_after_average); the alternative re-selects the winner inside each
// draw from the plug-in net benefits of the merged sample (winner_per_draw).
enum class Estimator { winner_after_average, winner_per_draw };

// Population the net benefits are evaluated on, governing the current and
// future sides alike so that a future sample of size zero is exactly value
// free. merged_sample evaluates on the rows themselves with unit weights
// (the development rows now, development plus regenerated rows later);
// weighted_development evaluates on the development rows under the
// iteration's case-mix weights.
enum class EvalPopulation { merged_sample, weighted_development };

struct VoiConfig {
  std::int64_t iterations = 100000;      // outer bootstrap draws T
  std::vector<std::int64_t> future_sizes;  // candidate n*; empty = EVPI only
  ThresholdGrid grid = ThresholdGrid::percent_grid();
  OuterScheme outer_scheme = OuterScheme::bayesian;
  Estimator estimator = Estimator::winner_after_average;
  ThresholdRule inequality = ThresholdRule::non_strict;
  EvalPopulation evaluation_population = EvalPopulation::merged_sample;
  RngSpec rng;
  FitOptions fit;
  // Keep the per-iteration model-vs-best-alternative increments needed for
  // percentile confidence bands (iterations x grid doubles).
  bool keep_increments = false;
  // A run aborts when at least this fraction of iterations is degenerate.
  double max_degenerate_fraction = 0.01;
};

// Net benefits produced by one outer draw: the current-information triple
// and perfect-information benchmark over the threshold grid, and the
// future-scenario triples per candidate size. plug_* hold the merged-sample
// plug-in triples and are filled only under winner_per_draw.
struct IterationRecord {
  bool degenerate = false;
  int ridge_fallback_fits = 0;
  Eigen::ArrayXd cur_model, cur_all, cur_perfect;
  std::vector<Eigen::ArrayXd> fut_model, fut_all;
  std::vector<Eigen::ArrayXd> plug_model, plug_all;
};

// Order-independent accumulation of iteration records: per-block partial
// sums are merged in fixed block order, so results are bit-identical for
// any thread count.
class RecordAccumulator {
 public:
  RecordAccumulator(Eigen::Index n_thresholds, Eigen::Index n_future_sizes,
                    Estimator estimator);

  void add(const IterationRecord& rec);
  void merge(const RecordAccumulator& other);

  std::int64_t usable() const { return usable_; }
  std::int64_t degenerate() const { return degenerate_; }
  std::int64_t ridge_fallback_fits() const { return ridge_fallback_; }

  Eigen::Index thresholds() const { return nz_; }
  Eigen::Index future_sizes() const { return nk_; }
  Estimator estimator() const { return estimator_; }

  const Eigen::ArrayXd& sum_cur(int strategy) const;    // 1 = model, 2 = all
  const Eigen::ArrayXd& sumsq_cur(int strategy) const;
  const Eigen::ArrayXd& sum_cur_perfect() const { return sum_cur_perfect_; }
  const Eigen::ArrayXd& sumsq_cur_perfect() const { return sumsq_cur_perfect_; }
  const Eigen::ArrayXd& sum_fut(Eigen::Index k, int strategy) const;
  const Eigen::ArrayXd& sumsq_fut(Eigen::Index k, int strategy) const;
  const Eigen::ArrayXd& sum_fut_winner(Eigen::Index k) const;
  const Eigen::ArrayXd& sumsq_fut_winner(Eigen::Index k) const;
  const std::vector<std::array<Eigen::ArrayX<std::int64_t>, 3>>& winner_counts() const {
    return winner_counts_;
  }

 private:
  Eigen::Index nz_ = 0, nk_ = 0;
  Estimator estimator_ = Estimator::winner_after_average;
  std::int64_t usable_ = 0, degenerate_ = 0, ridge_fallback_ = 0;
  Eigen::ArrayXd sum_cur_model_, sumsq_cur_model_;
  Eigen::ArrayXd sum_cur_all_, sumsq_cur_all_;
  Eigen::ArrayXd sum_cur_perfect_, sumsq_cur_perfect_;
  std::vector<Eigen::ArrayXd> sum_fut_model_, sumsq_fut_model_;
  std::vector<Eigen::ArrayXd> sum_fut_all_, sumsq_fut_all_;
  std::vector<Eigen::ArrayXd> sum_fut_winner_, sumsq_fut_winner_;
  std::vector<std::array<Eigen::ArrayX<std::int64_t>, 3>> winner_counts_;
};

// Expected net benefit of the strategies under current information, with
// Monte Carlo standard errors. enb_none is identically zero.
struct EnbTable {
  std::vector<double> z;
  Eigen::ArrayXd enb_model, enb_all, enb_perfect;
  Eigen::ArrayXd se_model, se_all, se_perfect;
};

struct VoiDiagnostics {
  std::int64_t usable_iterations = 0;
  std::int64_t degenerate_iterations = 0;
  std::int64_t ridge_fallback_fits = 0;
};

struct VoiResult {
  EnbTable enb;
  std::vector<int> winner_current;  // per z, in {0 none, 1 model, 2 all}
  Eigen::ArrayXd evpi;              // per z
  std::vector<std::int64_t> future_sizes;
  std::vector<Eigen::ArrayXd> evsi_raw;      // [k][z]
  std::vector<Eigen::ArrayXd> evsi_clamped;  // max(0, raw)
  std::vector<Eigen::ArrayXd> evsi_mc_se;
  // Winner selection frequencies per (k, strategy, z); filled only under
  // winner_per_draw.
  std::vector<std::array<Eigen::ArrayX<std::int64_t>, 3>> winner_frequencies;
  VoiDiagnostics diagnostics;
  // Row t holds the iteration's NB_model - max(0, NB_all) per z; NaN rows
  // mark degenerate iterations. Allocated only when keep_increments is set.
  Eigen::MatrixXd increments;
};

// One line-for-line pass of the outer loop: draw case-mix weights, refit to
// get this draw's truth, evaluate the current-information net benefits, and
// for each candidate size draw the future sample, refit on the merged data,
// and evaluate the future-scenario net benefits. theta_hat must be the
// uniform-weight fit on d. Fit failures mark the record degenerate.
IterationRecord run_iteration(const Dataset& d, const Coefficients& theta_hat,
                              const VoiConfig& cfg, std::uint64_t t);

// Averages the accumulated current-information records; requires at least
// two usable iterations.
EnbTable enb_current(const RecordAccumulator& acc, const ThresholdGrid& grid);

// Winner index among enb values (none, model, all); ties break toward the
// lower index. Inputs must be finite.
int pick_winner(double enb_none, double enb_model, double enb_all);

// Per-threshold expected value of perfect information:
// enb_perfect - max(0, enb_model, enb_all).
Eigen::ArrayXd compute_evpi(const EnbTable& enb);

// Expected value of sample information per (threshold, future size), raw and
// clamped at zero, with Monte Carlo standard errors from the variation of
// the future-scenario term.
VoiResult compute_evsi(const RecordAccumulator& acc, const EnbTable& enb,
                       const VoiConfig& cfg);

// Full engine: fit theta_hat, run cfg.iterations outer draws (in parallel
// when threads != 1; 0 = hardware concurrency), and reduce. Identical
// config and seed produce bit-identical results for any thread count.
// Throws if the degenerate fraction reaches cfg.max_degenerate_fraction.
VoiResult run_voi(const Dataset& d, const VoiConfig& cfg, int threads = 0);

struct PopulationImpact {
  double net_tp_per_year = 0.0;
  double fp_averted_per_year = 0.0;
};

// Scales a per-decision value to a population making annual_decisions
// decisions per year: net true positives gained, and the equivalent count
// of false positives averted at exchange rate (1-z)/z.
PopulationImpact scale_to_population(double per_decision_value, double annual_decisions,
                                     double z);

}  // namespace nbvoi
