#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <unordered_set>
#include <vector>

#include "nbvoi/dataset.hpp"
#include "nbvoi/errors.hpp"
#include "nbvoi/resample.hpp"
#include "nbvoi/rng.hpp"

using namespace nbvoi;

namespace {

Dataset tiny_dataset(Eigen::Index n) {
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    x(j, 0) = 1.0;
    x(j, 1) = static_cast<double>(j);
    y[j] = j % 2 == 0 ? 0.0 : 1.0;
  }
  return Dataset::from_encoded(
      x, y,
      {{"y", ColumnKind::binary, ColumnRole::outcome, {}},
       {"x", ColumnKind::continuous, ColumnRole::predictor, {}}},
      {}, {"(intercept)", "x"});
}

}  // namespace

TEST_CASE("stream derivation is reproducible and order-free") {
  RngSpec spec{12345};
  Stream a(spec, 7, Phase::outer_weights);
  Stream b(spec, 7, Phase::outer_weights);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  // Distinct phases and iterations give unrelated streams.
  Stream c(spec, 7, Phase::future_indices);
  Stream d(spec, 8, Phase::outer_weights);
  Stream e(spec, 7, Phase::outer_weights);
  int same_c = 0, same_d = 0;
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t ref = e.next_u64();
    same_c += ref == c.next_u64();
    same_d += ref == d.next_u64();
  }
  CHECK(same_c == 0);
  CHECK(same_d == 0);
}

TEST_CASE("stream keys do not collide across iterations and phases") {
  std::unordered_set<std::uint64_t> keys;
  const std::vector<Phase> phases{Phase::outer_weights,   Phase::future_indices,
                                  Phase::future_outcomes, Phase::synth_covariates,
                                  Phase::synth_outcomes,  Phase::oracle_covariates};
  for (std::uint64_t seed : {0ULL, 1ULL, 0xdeadbeefULL}) {
    for (std::uint64_t t = 0; t < 2000; ++t) {
      for (const Phase ph : phases) {
        CHECK(keys.insert(stream_key(seed, t, ph)).second);
      }
    }
  }
  CHECK(keys.size() == 3u * 2000u * 6u);
}

TEST_CASE("uniform doubles stay inside the unit interval") {
  Stream s(99);
  for (int i = 0; i < 10000; ++i) {
    const double u = s.next_unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("bayesian bootstrap weights") {
  RngSpec spec{7};

  SUBCASE("single row is forced to weight one") {
    Stream s(spec, 1, Phase::outer_weights);
    const WeightVector w = bayesian_bootstrap_weights(1, s);
    REQUIRE(w.size() == 1);
    CHECK(w.w[0] == 1.0);
    CHECK(w.form == WeightForm::dirichlet);
  }

  SUBCASE("weights are a probability vector") {
    for (std::uint64_t t = 1; t <= 50; ++t) {
      Stream s(spec, t, Phase::outer_weights);
      const WeightVector w = bayesian_bootstrap_weights(17, s);
      CHECK(std::abs(w.w.sum() - 1.0) <= 1e-12);
      CHECK((w.w.array() > 0.0).all());
    }
  }

  SUBCASE("marginal moments match the flat Dirichlet") {
    const Eigen::Index n = 10;
    const int draws = 30000;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd meansq = Eigen::VectorXd::Zero(n);
    for (int t = 1; t <= draws; ++t) {
      Stream s(spec, static_cast<std::uint64_t>(t), Phase::outer_weights);
      const WeightVector w = bayesian_bootstrap_weights(n, s);
      mean += w.w;
      meansq += w.w.cwiseProduct(w.w);
    }
    mean /= draws;
    meansq /= draws;
    const double var_expected =
        (n - 1.0) / (static_cast<double>(n) * n * (n + 1.0));  // flat Dirichlet
    const double se_mean = std::sqrt(var_expected / draws);
    for (Eigen::Index j = 0; j < n; ++j) {
      CHECK(std::abs(mean[j] - 1.0 / n) <= 3.0 * se_mean);
      const double var = meansq[j] - mean[j] * mean[j];
      CHECK(std::abs(var - var_expected) <= 0.075 * var_expected);
    }
  }
}

TEST_CASE("ordinary bootstrap counts") {
  RngSpec spec{11};

  SUBCASE("single row gets the whole sample") {
    Stream s(spec, 1, Phase::outer_weights);
    const WeightVector w = ordinary_bootstrap_counts(1, s);
    REQUIRE(w.size() == 1);
    CHECK(w.w[0] == 1.0);
    CHECK(w.form == WeightForm::counts);
  }

  SUBCASE("counts sum to n and average one per row") {
    const Eigen::Index n = 12;
    const int draws = 10000;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
    for (int t = 1; t <= draws; ++t) {
      Stream s(spec, static_cast<std::uint64_t>(t), Phase::outer_weights);
      const WeightVector w = ordinary_bootstrap_counts(n, s);
      CHECK(w.w.sum() == static_cast<double>(n));
      CHECK((w.w.array() >= 0.0).all());
      mean += w.w;
    }
    mean /= draws;
    // Count per cell is Binomial(n, 1/n): variance 1 - 1/n.
    const double se = std::sqrt((1.0 - 1.0 / n) / draws);
    for (Eigen::Index j = 0; j < n; ++j) {
      CHECK(std::abs(mean[j] - 1.0) <= 3.0 * se);
    }
  }
}

TEST_CASE("future covariate draws") {
  const Dataset d = tiny_dataset(6);
  RngSpec spec{23};

  SUBCASE("degenerate weights always select the same row") {
    WeightVector w{Eigen::VectorXd::Zero(6), WeightForm::dirichlet};
    w.w[3] = 1.0;
    Stream s(spec, 1, Phase::future_indices);
    const auto idx = draw_future_covariates(d, w, 40, s);
    REQUIRE(idx.size() == 40);
    for (const auto i : idx) CHECK(i == 3);
  }

  SUBCASE("zero-weight rows are never selected") {
    WeightVector w{Eigen::VectorXd::Zero(6), WeightForm::dirichlet};
    w.w[1] = 0.5;
    w.w[4] = 0.5;
    Stream s(spec, 2, Phase::future_indices);
    const auto idx = draw_future_covariates(d, w, 500, s);
    for (const auto i : idx) CHECK((i == 1 || i == 4));
  }

  SUBCASE("scaling the weights does not change the draws") {
    // Dyadic weights keep the 5x rescale and its running sums exact, so the
    // two index sequences must agree bit for bit, not just approximately.
    WeightVector w{Eigen::VectorXd::Zero(6), WeightForm::dirichlet};
    w.w << 0.0625, 0.25, 0.125, 0.3125, 0.1875, 0.0625;
    WeightVector scaled{5.0 * w.w, WeightForm::counts};
    Stream s1(spec, 3, Phase::future_indices);
    Stream s2(spec, 3, Phase::future_indices);
    const auto a = draw_future_covariates(d, w, 200, s1);
    const auto b = draw_future_covariates(d, scaled, 200, s2);
    CHECK(a == b);
  }

  SUBCASE("uniform weights hit every row at the expected rate") {
    WeightVector w{Eigen::VectorXd::Ones(6), WeightForm::uniform};
    Stream s(spec, 4, Phase::future_indices);
    const Eigen::Index n_star = 60000;
    const auto idx = draw_future_covariates(d, w, n_star, s);
    std::vector<int> freq(6, 0);
    for (const auto i : idx) ++freq[static_cast<size_t>(i)];
    const double expected = static_cast<double>(n_star) / 6.0;
    const double se = std::sqrt(n_star * (1.0 / 6.0) * (5.0 / 6.0));
    for (const int f : freq) CHECK(std::abs(f - expected) <= 3.0 * se);
  }

  SUBCASE("all-zero weights are rejected") {
    WeightVector w{Eigen::VectorXd::Zero(6), WeightForm::dirichlet};
    Stream s(spec, 5, Phase::future_indices);
    CHECK_THROWS_AS(draw_future_covariates(d, w, 10, s), ValidationError);
  }
}

TEST_CASE("outcome regeneration") {
  RngSpec spec{31};

  SUBCASE("extreme risks are deterministic") {
    const std::vector<Eigen::Index> idx{0, 1, 0, 1, 0, 1};
    Eigen::VectorXd risks(2);
    risks << 0.0, 1.0;
    Stream s(spec, 1, Phase::future_outcomes);
    const Eigen::VectorXd y = regenerate_outcomes(idx, risks, s);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      CHECK(y[i] == (idx[static_cast<size_t>(i)] == 1 ? 1.0 : 0.0));
    }
  }

  SUBCASE("intermediate risk matches the binomial rate") {
    const Eigen::Index m = 100000;
    const std::vector<Eigen::Index> idx(static_cast<size_t>(m), 0);
    Eigen::VectorXd risks(1);
    risks << 0.3;
    Stream s(spec, 2, Phase::future_outcomes);
    const Eigen::VectorXd y = regenerate_outcomes(idx, risks, s);
    const double se = std::sqrt(0.3 * 0.7 / static_cast<double>(m));
    CHECK(std::abs(y.mean() - 0.3) <= 3.0 * se);
  }

  SUBCASE("bad indices and risks are rejected") {
    Eigen::VectorXd risks(2);
    risks << 0.5, 1.5;
    Stream s(spec, 3, Phase::future_outcomes);
    CHECK_THROWS_AS(regenerate_outcomes({5}, risks, s), ValidationError);
    CHECK_THROWS_AS(regenerate_outcomes({1}, risks, s), ValidationError);
  }
}

TEST_CASE("normal draws have the right first two moments") {
  Stream s(404);
  const int m = 50000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < m; ++i) {
    const double v = s.next_normal(2.0, 3.0);
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / m;
  const double var = sumsq / m - mean * mean;
  CHECK(std::abs(mean - 2.0) <= 3.0 * 3.0 / std::sqrt(static_cast<double>(m)));
  CHECK(std::abs(var - 9.0) <= 9.0 * 0.05);
}

TEST_CASE("index draws cover the range uniformly") {
  Stream s(505);
  std::vector<int> freq(8, 0);
  const int m = 40000;
  for (int i = 0; i < m; ++i) {
    const std::uint64_t k = s.next_index(8);
    REQUIRE(k < 8);
    ++freq[static_cast<size_t>(k)];
  }
  const double expected = m / 8.0;
  const double se = std::sqrt(m * (1.0 / 8.0) * (7.0 / 8.0));
  for (const int f : freq) CHECK(std::abs(f - expected) <= 3.0 * se);
}
