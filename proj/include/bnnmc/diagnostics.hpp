#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bnnmc/errors.hpp"

namespace bnnmc {

// Per-step record the sampler emits; the source of every diagnostic and of
// the diagnostics CSV.
struct ChainRecord {
  std::size_t step = 0;
  double step_size = 0.0;
  std::vector<double> kinetic_temp;  // per group; empty for momentum-free kernels
  std::vector<double> config_temp;   // per group
  double potential = 0.0;
  bool has_accept = false;
  bool accepted = false;
  double delta_h = 0.0;
};

// T_kin = p^T M^-1 p / d. Under p ~ Normal(0, T M) this has expectation T
// and d * T_kin / T is chi-squared with d degrees of freedom.
inline double kinetic_temperature(std::span<const double> momentum,
                                  std::span<const double> mass, std::size_t dof) {
  require(dof >= 1, ErrorCode::DomainError, "kinetic_temperature: dof must be >= 1");
  double s = 0.0;
  for (std::size_t i = 0; i < momentum.size(); ++i) {
    s += momentum[i] * momentum[i] / mass[i];
  }
  return s / static_cast<double>(dof);
}

// T_conf = theta^T grad U / d; expectation T for targets exp(-U/T) with
// vanishing boundary terms.
inline double configurational_temperature(std::span<const double> theta,
                                          std::span<const double> grad,
                                          std::size_t dof) {
  require(dof >= 1, ErrorCode::DomainError,
          "configurational_temperature: dof must be >= 1");
  double s = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) s += theta[i] * grad[i];
  return s / static_cast<double>(dof);
}

// Standard error of the series mean by batch means with floor(sqrt(n))
// batches; robust to autocorrelation without extra tuning.
inline double batch_means_stderr(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 2) return 0.0;
  const std::size_t n_batches = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  if (n_batches < 2) return 0.0;
  const std::size_t batch_len = n / n_batches;
  std::vector<double> means(n_batches, 0.0);
  for (std::size_t b = 0; b < n_batches; ++b) {
    for (std::size_t i = 0; i < batch_len; ++i) {
      means[b] += series[b * batch_len + i];
    }
    means[b] /= static_cast<double>(batch_len);
  }
  double grand = 0.0;
  for (double m : means) grand += m;
  grand /= static_cast<double>(n_batches);
  double var = 0.0;
  for (double m : means) var += (m - grand) * (m - grand);
  var /= static_cast<double>(n_batches - 1);
  return std::sqrt(var / static_cast<double>(n_batches));
}

struct TemperatureSeries {
  std::string group;
  std::vector<double> estimates;
  double mean = 0.0;
  double std_error = 0.0;
};

enum class TemperatureKind { Kinetic, Configurational };

inline TemperatureSeries temperature_series(std::span<const ChainRecord> records,
                                            TemperatureKind kind,
                                            std::size_t group_index,
                                            const std::string& group_name) {
  TemperatureSeries ts;
  ts.group = group_name;
  for (const ChainRecord& r : records) {
    const std::vector<double>& src =
        kind == TemperatureKind::Kinetic ? r.kinetic_temp : r.config_temp;
    if (group_index < src.size()) ts.estimates.push_back(src[group_index]);
  }
  if (!ts.estimates.empty()) {
    double s = 0.0;
    for (double v : ts.estimates) s += v;
    ts.mean = s / static_cast<double>(ts.estimates.size());
    ts.std_error = batch_means_stderr(ts.estimates);
  }
  return ts;
}

struct GroupCalibration {
  std::string group;
  bool has_kinetic = false;
  double kinetic_mean = 0.0;
  double kinetic_se = 0.0;
  bool kinetic_pass = false;
  double config_mean = 0.0;
  double config_se = 0.0;
  bool config_pass = false;
};

struct ChainSummary {
  std::vector<GroupCalibration> groups;
  bool has_acceptance = false;
  double acceptance_rate = 0.0;
};

// Per-group running means with batch-means standard errors and a calibration
// verdict against the sampling temperature: PASS iff |mean - T| <= 3 SE (up
// to summation roundoff, so a constant series at T passes with SE = 0).
inline ChainSummary summarize(std::span<const ChainRecord> records,
                              std::span<const std::string> group_names,
                              double temperature) {
  require(!records.empty(), ErrorCode::EmptyChain, "no records to summarize");
  const auto calibrated = [temperature](double mean, double se) {
    const double slack = 1e-12 * std::max(1.0, std::abs(temperature));
    return std::abs(mean - temperature) <= 3.0 * se + slack;
  };
  ChainSummary summary;
  for (std::size_t g = 0; g < group_names.size(); ++g) {
    GroupCalibration cal;
    cal.group = group_names[g];
    const TemperatureSeries kin =
        temperature_series(records, TemperatureKind::Kinetic, g, cal.group);
    const TemperatureSeries conf =
        temperature_series(records, TemperatureKind::Configurational, g, cal.group);
    cal.has_kinetic = !kin.estimates.empty();
    if (cal.has_kinetic) {
      cal.kinetic_mean = kin.mean;
      cal.kinetic_se = kin.std_error;
      cal.kinetic_pass = calibrated(kin.mean, kin.std_error);
    }
    cal.config_mean = conf.mean;
    cal.config_se = conf.std_error;
    cal.config_pass = calibrated(conf.mean, conf.std_error);
    summary.groups.push_back(std::move(cal));
  }
  std::size_t mh_steps = 0;
  std::size_t accepted = 0;
  for (const ChainRecord& r : records) {
    if (r.has_accept) {
      ++mh_steps;
      accepted += r.accepted ? 1 : 0;
    }
  }
  summary.has_acceptance = mh_steps > 0;
  if (summary.has_acceptance) {
    summary.acceptance_rate =
        static_cast<double>(accepted) / static_cast<double>(mh_steps);
  }
  return summary;
}

// One row per (step, group): step,group,kinetic_temp,config_temp,step_size,
// accept,delta_H. Fields that do not apply stay empty.
inline void write_diagnostics_csv(std::ostream& out,
                                  std::span<const ChainRecord> records,
                                  std::span<const std::string> group_names) {
  out << "step,group,kinetic_temp,config_temp,step_size,accept,delta_H\n";
  char buf[64];
  const auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return std::string(buf);
  };
  for (const ChainRecord& r : records) {
    for (std::size_t g = 0; g < group_names.size(); ++g) {
      out << r.step << ',' << group_names[g] << ',';
      if (g < r.kinetic_temp.size()) out << fmt(r.kinetic_temp[g]);
      out << ',';
      if (g < r.config_temp.size()) out << fmt(r.config_temp[g]);
      out << ',' << fmt(r.step_size) << ',';
      if (r.has_accept) out << (r.accepted ? 1 : 0);
      out << ',';
      if (r.has_accept) out << fmt(r.delta_h);
      out << '\n';
    }
  }
}

}  // namespace bnnmc
