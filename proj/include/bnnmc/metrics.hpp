#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bnnmc/errors.hpp"
#include "bnnmc/linalg.hpp"

namespace bnnmc {

struct MetricReport {
  double temperature = 1.0;
  double accuracy = 0.0;
  double log_lik = 0.0;  // mean test log likelihood, nats per point
  double ece = 0.0;
  double auroc = 0.0;
};

// Fraction of rows whose argmax matches the target; works on any monotone
// transform of the class probabilities.
inline double accuracy_score(const Matrix& scores, std::span<const int> targets) {
  require(scores.rows == targets.size(), ErrorCode::DimensionMismatch,
          "scores and targets disagree in length");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.rows; ++i) {
    const std::span<const double> row = scores.row(i);
    std::size_t arg = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[arg]) arg = c;
    }
    if (static_cast<int>(arg) == targets[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(scores.rows);
}

// (accuracy, mean log p(target)) from normalized per-point class
// probabilities.
inline std::pair<double, double> classification_metrics(const Matrix& probs,
                                                        std::span<const int> targets) {
  require(probs.rows == targets.size(), ErrorCode::DimensionMismatch,
          "probabilities and targets disagree in length");
  require(probs.rows >= 1, ErrorCode::EmptyInput, "no rows");
  double loglik = 0.0;
  for (std::size_t i = 0; i < probs.rows; ++i) {
    const std::span<const double> row = probs.row(i);
    double sum = 0.0;
    for (double v : row) sum += v;
    require(std::abs(sum - 1.0) <= 1e-9, ErrorCode::DomainError,
            "row " + std::to_string(i) + " probabilities sum to " + std::to_string(sum));
    const int y = targets[i];
    require(y >= 0 && static_cast<std::size_t>(y) < probs.cols,
            ErrorCode::DimensionMismatch, "target outside class range");
    loglik += std::log(row[static_cast<std::size_t>(y)]);
  }
  return {accuracy_score(probs, targets), loglik / static_cast<double>(probs.rows)};
}

// Expected calibration error over equal-width confidence bins on [0, 1]:
// ECE = sum_b (n_b / n) |acc_b - conf_b|; empty bins contribute nothing.
inline double ece(const Matrix& probs, std::span<const int> targets,
                  std::size_t bins = 15) {
  require(bins >= 1, ErrorCode::InvalidConfig, "ece needs at least one bin");
  require(probs.rows == targets.size(), ErrorCode::DimensionMismatch,
          "probabilities and targets disagree in length");
  std::vector<double> conf_sum(bins, 0.0);
  std::vector<double> acc_sum(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  for (std::size_t i = 0; i < probs.rows; ++i) {
    const std::span<const double> row = probs.row(i);
    std::size_t arg = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[arg]) arg = c;
    }
    const double conf = row[arg];
    std::size_t b = static_cast<std::size_t>(conf * static_cast<double>(bins));
    if (b >= bins) b = bins - 1;
    conf_sum[b] += conf;
    acc_sum[b] += static_cast<int>(arg) == targets[i] ? 1.0 : 0.0;
    ++count[b];
  }
  double e = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const double nb = static_cast<double>(count[b]);
    e += nb / static_cast<double>(probs.rows) *
         std::abs(acc_sum[b] / nb - conf_sum[b] / nb);
  }
  return e;
}

// AUROC for separating OOD from in-distribution points by score (higher =
// more OOD), computed from the Mann-Whitney rank statistic with ties
// counted one half.
inline double ood_auroc(std::span<const double> in_scores,
                        std::span<const double> ood_scores) {
  require(!in_scores.empty() && !ood_scores.empty(), ErrorCode::EmptyInput,
          "ood_auroc needs both score lists non-empty");
  struct Tagged {
    double score;
    bool ood;
  };
  std::vector<Tagged> all;
  all.reserve(in_scores.size() + ood_scores.size());
  for (double s : in_scores) all.push_back({s, false});
  for (double s : ood_scores) all.push_back({s, true});
  std::stable_sort(all.begin(), all.end(),
                   [](const Tagged& a, const Tagged& b) { return a.score < b.score; });

  // Average ranks across ties, then U = sum(ranks of OOD) - n_o (n_o + 1)/2.
  double rank_sum_ood = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].ood) rank_sum_ood += avg_rank;
    }
    i = j;
  }
  const double n_o = static_cast<double>(ood_scores.size());
  const double n_i = static_cast<double>(in_scores.size());
  const double u = rank_sum_ood - 0.5 * n_o * (n_o + 1.0);
  return u / (n_i * n_o);
}

// Entropy of one predictive distribution; the OOD score.
inline double predictive_entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

// Rows sorted ascending in temperature; duplicates are an error.
inline std::vector<MetricReport> tempering_table(std::vector<MetricReport> reports) {
  require(!reports.empty(), ErrorCode::EmptyInput, "tempering_table needs reports");
  std::sort(reports.begin(), reports.end(),
            [](const MetricReport& a, const MetricReport& b) {
              return a.temperature < b.temperature;
            });
  for (std::size_t i = 1; i < reports.size(); ++i) {
    if (reports[i].temperature == reports[i - 1].temperature) {
      fail(ErrorCode::DuplicateTemperature,
           "temperature " + std::to_string(reports[i].temperature) + " appears twice");
    }
  }
  return reports;
}

inline void write_metrics_csv(std::ostream& out, std::span<const MetricReport> reports) {
  out << "temperature,accuracy,log_lik,ece,auroc\n";
  char buf[64];
  const auto fmt = [&buf, &out](double v) {
    if (std::isnan(v)) return;  // fields that do not apply stay empty
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    out << buf;
  };
  for (const MetricReport& r : reports) {
    fmt(r.temperature);
    out << ',';
    fmt(r.accuracy);
    out << ',';
    fmt(r.log_lik);
    out << ',';
    fmt(r.ece);
    out << ',';
    fmt(r.auroc);
    out << '\n';
  }
}

}  // namespace bnnmc
