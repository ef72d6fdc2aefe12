#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>
#include <vector>

#include "bnnmc/metrics.hpp"
#include "bnnmc/rng.hpp"

using namespace bnnmc;

namespace {

Matrix probs_from(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.begin()->size());
  std::size_t i = 0;
  for (const auto& row : rows) {
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("classification metrics on the worked example") {
  const Matrix probs = probs_from({{0.7, 0.3}, {0.2, 0.8}});
  const std::vector<int> targets = {0, 0};
  const auto [acc, loglik] = classification_metrics(probs, targets);
  CHECK(acc == doctest::Approx(0.5));
  CHECK(loglik == doctest::Approx((std::log(0.7) + std::log(0.2)) / 2.0).epsilon(1e-12));
  CHECK(loglik == doctest::Approx(-0.98306).epsilon(1e-4));
}

TEST_CASE("perfect one-hot predictions score accuracy 1 and log lik 0") {
  const Matrix probs = probs_from({{1.0, 0.0}, {0.0, 1.0}});
  const std::vector<int> targets = {0, 1};
  const auto [acc, loglik] = classification_metrics(probs, targets);
  CHECK(acc == 1.0);
  CHECK(loglik == 0.0);
}

TEST_CASE("uniform predictions score log lik -log C") {
  const Matrix probs = probs_from({{0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25}});
  const std::vector<int> targets = {2, 0};
  const auto [acc, loglik] = classification_metrics(probs, targets);
  CHECK(loglik == doctest::Approx(-std::log(4.0)).epsilon(1e-12));
  (void)acc;
}

TEST_CASE("mismatched probability rows are rejected") {
  const Matrix probs = probs_from({{0.7, 0.4}});  // sums to 1.1
  const std::vector<int> targets = {0};
  CHECK_THROWS_AS(classification_metrics(probs, targets), Error);
}

TEST_CASE("ece on the worked single-bin examples") {
  // All confidence 1.0 and all correct: perfectly calibrated.
  const Matrix sure = probs_from({{1.0, 0.0}, {1.0, 0.0}});
  const std::vector<int> right = {0, 0};
  CHECK(ece(sure, right) == doctest::Approx(0.0));

  // All confidence 0.8 at accuracy 0.5: |0.5 - 0.8| = 0.3.
  const Matrix mid = probs_from({{0.8, 0.2}, {0.8, 0.2}});
  const std::vector<int> half = {0, 1};
  CHECK(ece(mid, half) == doctest::Approx(0.3).epsilon(1e-12));

  // Confidence 1.0, one right and one wrong: |0.5 - 1.0| = 0.5.
  const Matrix overconfident = probs_from({{1.0, 0.0}, {1.0, 0.0}});
  const std::vector<int> mixed = {0, 1};
  CHECK(ece(overconfident, mixed) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("ece is invariant under permutation of the data points") {
  Rng rng(15);
  const std::size_t n = 64;
  Matrix probs(n, 3);
  std::vector<int> targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
    const double s = a + b + c;
    probs(i, 0) = a / s;
    probs(i, 1) = b / s;
    probs(i, 2) = c / s;
    targets[i] = static_cast<int>(rng.index(3));
  }
  const double before = ece(probs, targets);

  // Reverse the rows.
  Matrix rev(n, 3);
  std::vector<int> rev_targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 3; ++j) rev(i, j) = probs(n - 1 - i, j);
    rev_targets[i] = targets[n - 1 - i];
  }
  CHECK(ece(rev, rev_targets) == doctest::Approx(before).epsilon(1e-14));
}

TEST_CASE("auroc on the worked examples") {
  const std::vector<double> in = {0.1, 0.4};
  const std::vector<double> ood = {0.3, 0.9};
  CHECK(ood_auroc(in, ood) == doctest::Approx(0.75));

  // Perfect separation.
  const std::vector<double> low = {0.1, 0.2};
  const std::vector<double> high = {0.5, 0.9};
  CHECK(ood_auroc(low, high) == doctest::Approx(1.0));

  // Identical lists: all ties -> 0.5.
  CHECK(ood_auroc(low, low) == doctest::Approx(0.5));

  const std::vector<double> empty;
  CHECK_THROWS_AS(ood_auroc(empty, high), Error);
}

TEST_CASE("auroc complement property for tie-free inputs") {
  Rng rng(8);
  std::vector<double> a(20), b(15);
  for (double& v : a) v = rng.uniform();
  for (double& v : b) v = rng.uniform();
  CHECK(ood_auroc(a, b) + ood_auroc(b, a) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("accuracy is invariant under monotone transforms of the scores") {
  Rng rng(23);
  const std::size_t n = 50;
  Matrix probs(n, 4);
  std::vector<int> targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      probs(i, j) = rng.uniform();
      s += probs(i, j);
    }
    for (std::size_t j = 0; j < 4; ++j) probs(i, j) /= s;
    targets[i] = static_cast<int>(rng.index(4));
  }
  const double base = accuracy_score(probs, targets);

  Matrix logs = probs;
  for (double& v : logs.data) v = std::log(v);
  CHECK(accuracy_score(logs, targets) == base);

  Matrix cubed = probs;
  for (double& v : cubed.data) v = v * v * v;
  CHECK(accuracy_score(cubed, targets) == base);
}

TEST_CASE("predictive entropy peaks at the uniform distribution") {
  const std::vector<double> uniform = {0.25, 0.25, 0.25, 0.25};
  const std::vector<double> spiked = {0.97, 0.01, 0.01, 0.01};
  CHECK(predictive_entropy(uniform) == doctest::Approx(std::log(4.0)));
  CHECK(predictive_entropy(spiked) < predictive_entropy(uniform));
  const std::vector<double> onehot = {1.0, 0.0};
  CHECK(predictive_entropy(onehot) == 0.0);
}

TEST_CASE("tempering table sorts by temperature and rejects duplicates") {
  std::vector<MetricReport> reports(3);
  reports[0].temperature = 1.0;
  reports[1].temperature = 0.1;
  reports[2].temperature = 0.3;
  const std::vector<MetricReport> sorted = tempering_table(reports);
  CHECK(sorted[0].temperature == 0.1);
  CHECK(sorted[1].temperature == 0.3);
  CHECK(sorted[2].temperature == 1.0);

  const std::vector<MetricReport> single = tempering_table({reports[0]});
  CHECK(single.size() == 1);

  reports[1].temperature = 1.0;
  CHECK_THROWS_AS(tempering_table(reports), Error);
}

TEST_CASE("metrics CSV carries the fixed header") {
  MetricReport r;
  r.temperature = 0.5;
  r.accuracy = 0.9;
  r.log_lik = -0.2;
  r.ece = 0.05;
  r.auroc = 0.8;
  std::ostringstream out;
  const MetricReport rows[1] = {r};
  write_metrics_csv(out, rows);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "temperature,accuracy,log_lik,ece,auroc");
  std::getline(in, line);
  CHECK(line == "0.5,0.9,-0.2,0.05,0.8");
}
