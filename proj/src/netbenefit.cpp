#include "nbvoi/netbenefit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nbvoi {

namespace {

void check_threshold(double z) {
  if (!(z > 0.0) || !(z < 1.0)) {
    throw ValidationError("net benefit: threshold must lie strictly inside (0, 1)");
  }
}

void check_lengths(Eigen::Index a, Eigen::Index b, Eigen::Index w) {
  if (a != b || a != w) throw ValidationError("net benefit: input length mismatch");
  if (a == 0) throw ValidationError("net benefit: empty inputs");
}

double checked_total(const Eigen::Ref<const Eigen::VectorXd>& w) {
  const double total = w.sum();
  if (!(total > 0.0)) throw ValidationError("net benefit: total weight must be positive");
  return total;
}

bool treat(double risk, double z, ThresholdRule rule) {
  return rule == ThresholdRule::non_strict ? risk >= z : risk > z;
}

// Shared engine for the whole-grid curves: per-row benefit b and harm h
// terms are prefix-summed in decision-risk order, so each threshold costs
// one binary search instead of a scan.
Eigen::ArrayXd suffix_curve(const Eigen::Ref<const Eigen::VectorXd>& decision_risks,
                            const Eigen::VectorXd& b, const Eigen::VectorXd& h,
                            double total_w, const ThresholdGrid& grid,
                            ThresholdRule rule) {
  const Eigen::Index m = decision_risks.size();
  std::vector<Eigen::Index> order(static_cast<size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index c) {
    return decision_risks[a] < decision_risks[c];
  });

  std::vector<double> sorted_dr(static_cast<size_t>(m));
  std::vector<double> pre_b(static_cast<size_t>(m) + 1, 0.0);
  std::vector<double> pre_h(static_cast<size_t>(m) + 1, 0.0);
  for (size_t i = 0; i < order.size(); ++i) {
    sorted_dr[i] = decision_risks[order[i]];
    pre_b[i + 1] = pre_b[i] + b[order[i]];
    pre_h[i + 1] = pre_h[i] + h[order[i]];
  }
  const double total_b = pre_b.back();
  const double total_h = pre_h.back();

  Eigen::ArrayXd nb(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double z = grid[i];
    // First treated position in sorted order: risk >= z, or > z when strict.
    const auto it = rule == ThresholdRule::non_strict
                        ? std::lower_bound(sorted_dr.begin(), sorted_dr.end(), z)
                        : std::upper_bound(sorted_dr.begin(), sorted_dr.end(), z);
    const auto pos = static_cast<size_t>(it - sorted_dr.begin());
    const double suf_b = total_b - pre_b[pos];
    const double suf_h = total_h - pre_h[pos];
    nb[i] = (suf_b - harm_ratio(z) * suf_h) / total_w;
  }
  return nb;
}

}  // namespace

ThresholdGrid::ThresholdGrid(std::vector<double> z_values) : z_(std::move(z_values)) {
  if (z_.empty()) throw ValidationError("threshold grid: empty");
  double prev = 0.0;
  for (const double z : z_) {
    if (!(z > 0.0) || !(z < 1.0)) {
      throw ValidationError("threshold grid: thresholds must lie strictly inside (0, 1)");
    }
    if (!(z > prev)) throw ValidationError("threshold grid: must be strictly increasing");
    prev = z;
  }
}

ThresholdGrid ThresholdGrid::percent_grid() {
  std::vector<double> z(99);
  for (int i = 1; i <= 99; ++i) z[static_cast<size_t>(i) - 1] = i / 100.0;
  return ThresholdGrid(std::move(z));
}

ThresholdGrid ThresholdGrid::regular(double lo, double hi, double step) {
  if (!(step > 0.0) || !(lo <= hi)) {
    throw ValidationError("threshold grid: need step > 0 and lo <= hi");
  }
  std::vector<double> z;
  for (int k = 0;; ++k) {
    const double v = lo + k * step;
    if (v > hi + step / 2.0) break;
    z.push_back(v);
  }
  return ThresholdGrid(std::move(z));
}

double nb_treat_all(const Eigen::Ref<const Eigen::VectorXd>& eval_risks,
                    const Eigen::Ref<const Eigen::VectorXd>& w, double z) {
  check_threshold(z);
  check_lengths(eval_risks.size(), eval_risks.size(), w.size());
  const double total = checked_total(w);
  const double ratio = harm_ratio(z);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < eval_risks.size(); ++j) {
    acc += w[j] * (eval_risks[j] - (1.0 - eval_risks[j]) * ratio);
  }
  return acc / total;
}

double nb_model(const Eigen::Ref<const Eigen::VectorXd>& decision_risks,
                const Eigen::Ref<const Eigen::VectorXd>& eval_risks,
                const Eigen::Ref<const Eigen::VectorXd>& w, double z, ThresholdRule rule) {
  check_threshold(z);
  check_lengths(decision_risks.size(), eval_risks.size(), w.size());
  const double total = checked_total(w);
  const double ratio = harm_ratio(z);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < decision_risks.size(); ++j) {
    if (treat(decision_risks[j], z, rule)) {
      acc += w[j] * (eval_risks[j] - (1.0 - eval_risks[j]) * ratio);
    }
  }
  return acc / total;
}

double nb_perfect(const Eigen::Ref<const Eigen::VectorXd>& eval_risks,
                  const Eigen::Ref<const Eigen::VectorXd>& w, double z, ThresholdRule rule) {
  return nb_model(eval_risks, eval_risks, w, z, rule);
}

double empirical_nb(const Eigen::Ref<const Eigen::VectorXd>& decision_risks,
                    const Eigen::Ref<const Eigen::VectorXd>& y,
                    const Eigen::Ref<const Eigen::VectorXd>& w, double z,
                    ThresholdRule rule) {
  check_threshold(z);
  check_lengths(decision_risks.size(), y.size(), w.size());
  const double total = checked_total(w);
  const double ratio = harm_ratio(z);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < decision_risks.size(); ++j) {
    if (treat(decision_risks[j], z, rule)) {
      acc += w[j] * (y[j] - (1.0 - y[j]) * ratio);
    }
  }
  return acc / total;
}

Eigen::ArrayXd nb_model_curve(const Eigen::Ref<const Eigen::VectorXd>& decision_risks,
                              const Eigen::Ref<const Eigen::VectorXd>& eval_risks,
                              const Eigen::Ref<const Eigen::VectorXd>& w,
                              const ThresholdGrid& grid, ThresholdRule rule) {
  check_lengths(decision_risks.size(), eval_risks.size(), w.size());
  const double total = checked_total(w);
  const Eigen::VectorXd b = w.cwiseProduct(eval_risks);
  const Eigen::VectorXd h = w.cwiseProduct((1.0 - eval_risks.array()).matrix());
  return suffix_curve(decision_risks, b, h, total, grid, rule);
}

Eigen::ArrayXd nb_treat_all_curve(const Eigen::Ref<const Eigen::VectorXd>& eval_risks,
                                  const Eigen::Ref<const Eigen::VectorXd>& w,
                                  const ThresholdGrid& grid) {
  check_lengths(eval_risks.size(), eval_risks.size(), w.size());
  const double total = checked_total(w);
  double total_b = 0.0, total_h = 0.0;
  for (Eigen::Index j = 0; j < eval_risks.size(); ++j) {
    total_b += w[j] * eval_risks[j];
    total_h += w[j] * (1.0 - eval_risks[j]);
  }
  Eigen::ArrayXd nb(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    nb[i] = (total_b - harm_ratio(grid[i]) * total_h) / total;
  }
  return nb;
}

Eigen::ArrayXd nb_perfect_curve(const Eigen::Ref<const Eigen::VectorXd>& eval_risks,
                                const Eigen::Ref<const Eigen::VectorXd>& w,
                                const ThresholdGrid& grid, ThresholdRule rule) {
  return nb_model_curve(eval_risks, eval_risks, w, grid, rule);
}

Eigen::ArrayXd empirical_nb_curve(const Eigen::Ref<const Eigen::VectorXd>& decision_risks,
                                  const Eigen::Ref<const Eigen::VectorXd>& y,
                                  const Eigen::Ref<const Eigen::VectorXd>& w,
                                  const ThresholdGrid& grid, ThresholdRule rule) {
  check_lengths(decision_risks.size(), y.size(), w.size());
  const double total = checked_total(w);
  const Eigen::VectorXd b = w.cwiseProduct(y);
  const Eigen::VectorXd h = w.cwiseProduct((1.0 - y.array()).matrix());
  return suffix_curve(decision_risks, b, h, total, grid, rule);
}

}  // namespace nbvoi
