#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bnnmc/data.hpp"
#include "bnnmc/diagnostics.hpp"
#include "bnnmc/errors.hpp"
#include "bnnmc/model.hpp"
#include "bnnmc/prior.hpp"
#include "bnnmc/rng.hpp"

namespace bnnmc {

enum class SamplerKind { Sgld, Ggmc, Hmc };

inline const char* sampler_kind_name(SamplerKind k) {
  switch (k) {
    case SamplerKind::Sgld: return "sgld";
    case SamplerKind::Ggmc: return "ggmc";
    case SamplerKind::Hmc: return "hmc";
  }
  return "unknown";
}

struct PrecondConfig {
  bool enabled = false;
  double beta = 0.99;     // EMA factor for squared gradients
  double damping = 1e-6;  // additive floor on the per-coordinate scale
};

// Targets pi_T(theta) proportional to exp(-U(theta)/T).
struct SamplerConfig {
  SamplerKind kind = SamplerKind::Ggmc;
  double step_size = 1e-3;       // h0, the cyclical schedule's peak
  double temperature = 1.0;      // T
  double friction = 0.9;         // GGMC per-step momentum decay a in [0, 1)
  std::size_t leapfrog_steps = 10;  // HMC trajectory length L
  std::size_t cycles = 1;           // M_c
  std::size_t steps = 1000;         // K sampling steps
  std::size_t burn_in = 0;
  std::size_t thin = 1;          // 0 lets the pipeline derive it from n_samples
  PrecondConfig precond;
  std::uint64_t seed = 0;
  std::size_t batch_size = 0;    // 0 = full batch
};

inline void validate(const SamplerConfig& cfg) {
  require(cfg.step_size > 0.0, ErrorCode::InvalidConfig, "step_size must be positive");
  require(cfg.temperature > 0.0, ErrorCode::InvalidConfig, "temperature must be positive");
  require(cfg.friction >= 0.0 && cfg.friction < 1.0, ErrorCode::InvalidConfig,
          "friction must lie in [0, 1)");
  require(cfg.leapfrog_steps >= 1, ErrorCode::InvalidConfig,
          "leapfrog_steps must be >= 1");
  require(cfg.cycles >= 1, ErrorCode::InvalidConfig, "cycles must be >= 1");
  require(cfg.steps >= cfg.cycles, ErrorCode::InvalidConfig,
          "steps must be >= cycles");
  if (cfg.precond.enabled) {
    require(cfg.precond.beta > 0.0 && cfg.precond.beta < 1.0, ErrorCode::InvalidConfig,
            "precond beta must lie in (0, 1)");
    require(cfg.precond.damping > 0.0, ErrorCode::InvalidConfig,
            "precond damping must be positive");
  }
}

struct PotentialEval {
  double value = 0.0;
  std::vector<double> grad;
};

// Minibatch potential with its gradient at an arbitrary point. Within one
// step the function must be deterministic (the caller fixes the batch), so
// the MH correction sees the same energy as the B sub-steps.
using PotentialFn = std::function<PotentialEval(std::span<const double>)>;

struct KernelState {
  std::vector<double> theta;
  std::vector<double> momentum;
  std::vector<double> mass;         // diagonal M, scales the momenta
  std::vector<double> grad_sq_ema;  // preconditioner accumulator
  std::size_t step = 0;
  Rng rng;

  KernelState(std::vector<double> theta0, std::uint64_t seed)
      : theta(std::move(theta0)),
        momentum(theta.size(), 0.0),
        mass(theta.size(), 1.0),
        grad_sq_ema(theta.size(), 0.0),
        rng(seed) {}
};

// What one transition hands back for diagnostics: a stationary (theta, grad,
// U) triple plus the MH outcome where one exists.
struct StepResult {
  double potential = 0.0;
  std::vector<double> theta;
  std::vector<double> grad;
  bool has_accept = false;
  bool accepted = false;
  double delta_h = 0.0;
};

namespace detail {

inline void check_finite_state(const KernelState& s, double potential_value) {
  bool ok = std::isfinite(potential_value);
  for (double v : s.theta) ok = ok && std::isfinite(v);
  if (!ok) {
    fail(ErrorCode::DivergenceDetected,
         "non-finite state at step " + std::to_string(s.step));
  }
}

inline double kinetic_energy(std::span<const double> p, std::span<const double> mass) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * p[i] / mass[i];
  return 0.5 * s;
}

inline PotentialEval eval_or_diverge(const PotentialFn& fn, const KernelState& s) {
  try {
    return fn(s.theta);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NonFiniteGradient) {
      fail(ErrorCode::DivergenceDetected,
           "non-finite potential at step " + std::to_string(s.step));
    }
    throw;
  }
}

}  // namespace detail

// Overdamped Langevin with minibatch gradients, no accept/reject:
// theta' = theta - h M^-1 grad + Normal(0, 2 h T M^-1).
inline StepResult sgld_step(KernelState& state, const PotentialFn& potential_fn,
                            const SamplerConfig& cfg, double step_size) {
  PotentialEval eval = detail::eval_or_diverge(potential_fn, state);
  StepResult res;
  res.potential = eval.value;
  res.theta = state.theta;
  const double t2h = 2.0 * step_size * cfg.temperature;
  for (std::size_t i = 0; i < state.theta.size(); ++i) {
    const double inv_mass = 1.0 / state.mass[i];
    state.theta[i] += -step_size * inv_mass * eval.grad[i] +
                      std::sqrt(t2h * inv_mass) * state.rng.normal();
  }
  res.grad = std::move(eval.grad);
  ++state.step;
  detail::check_finite_state(state, res.potential);
  return res;
}

// Gradient-guided Monte Carlo: symmetric OBABO splitting at temperature T
// with a Metropolis-Hastings correction over the inner BAB segment. On
// rejection the position is restored and the momentum negated before the
// final O half-step. Valid with stochastic gradients (the same minibatch
// energy enters both ends of Delta H).
inline StepResult ggmc_step(KernelState& state, const PotentialFn& potential_fn,
                            const SamplerConfig& cfg, double step_size) {
  const double temp = cfg.temperature;
  const double sqrt_a = std::sqrt(cfg.friction);
  const double noise_scale = 1.0 - cfg.friction;
  const std::size_t d = state.theta.size();

  for (std::size_t i = 0; i < d; ++i) {
    state.momentum[i] = sqrt_a * state.momentum[i] +
                        std::sqrt(noise_scale * temp * state.mass[i]) *
                            state.rng.normal();
  }

  PotentialEval eval0 = detail::eval_or_diverge(potential_fn, state);
  const double h0 = eval0.value + detail::kinetic_energy(state.momentum, state.mass);
  const std::vector<double> theta0 = state.theta;
  const std::vector<double> momentum0 = state.momentum;

  for (std::size_t i = 0; i < d; ++i) {
    state.momentum[i] -= 0.5 * step_size * eval0.grad[i];
  }
  for (std::size_t i = 0; i < d; ++i) {
    state.theta[i] += step_size * state.momentum[i] / state.mass[i];
  }
  PotentialEval eval1 = detail::eval_or_diverge(potential_fn, state);
  for (std::size_t i = 0; i < d; ++i) {
    state.momentum[i] -= 0.5 * step_size * eval1.grad[i];
  }
  const double h1 = eval1.value + detail::kinetic_energy(state.momentum, state.mass);

  StepResult res;
  res.has_accept = true;
  res.delta_h = h1 - h0;
  require(std::isfinite(res.delta_h), ErrorCode::DivergenceDetected,
          "non-finite energy at step " + std::to_string(state.step));
  res.accepted = res.delta_h <= 0.0 ||
                 state.rng.uniform() < std::exp(-res.delta_h / temp);
  if (res.accepted) {
    res.potential = eval1.value;
    res.theta = state.theta;
    res.grad = std::move(eval1.grad);
  } else {
    state.theta = theta0;
    for (std::size_t i = 0; i < d; ++i) state.momentum[i] = -momentum0[i];
    res.potential = eval0.value;
    res.theta = theta0;
    res.grad = std::move(eval0.grad);
  }

  for (std::size_t i = 0; i < d; ++i) {
    state.momentum[i] = sqrt_a * state.momentum[i] +
                        std::sqrt(noise_scale * temp * state.mass[i]) *
                            state.rng.normal();
  }
  ++state.step;
  detail::check_finite_state(state, res.potential);
  return res;
}

// L velocity-Verlet steps of size h on U with diagonal mass, in place.
// `eval` must hold the potential at the incoming theta; returns the
// evaluation at the final theta. Time-reversible: negating the momentum and
// integrating again retraces the trajectory.
inline PotentialEval leapfrog(std::vector<double>& theta, std::vector<double>& momentum,
                              std::span<const double> mass, const PotentialFn& potential_fn,
                              std::size_t steps, double step_size, PotentialEval eval) {
  const std::size_t d = theta.size();
  for (std::size_t l = 0; l < steps; ++l) {
    for (std::size_t i = 0; i < d; ++i) momentum[i] -= 0.5 * step_size * eval.grad[i];
    for (std::size_t i = 0; i < d; ++i) theta[i] += step_size * momentum[i] / mass[i];
    eval = potential_fn(theta);
    for (std::size_t i = 0; i < d; ++i) momentum[i] -= 0.5 * step_size * eval.grad[i];
  }
  return eval;
}

// Hamiltonian Monte Carlo round: fresh momentum from Normal(0, T M), L
// leapfrog steps on U, exact MH test at temperature T. Requires the exact
// (full-batch) potential.
inline StepResult hmc_round(KernelState& state, const PotentialFn& potential_fn,
                            const SamplerConfig& cfg, double step_size) {
  const double temp = cfg.temperature;
  const std::size_t d = state.theta.size();
  for (std::size_t i = 0; i < d; ++i) {
    state.momentum[i] = std::sqrt(temp * state.mass[i]) * state.rng.normal();
  }

  PotentialEval eval = detail::eval_or_diverge(potential_fn, state);
  const double h0 = eval.value + detail::kinetic_energy(state.momentum, state.mass);
  const std::vector<double> theta0 = state.theta;
  const std::vector<double> momentum0 = state.momentum;
  const double potential0 = eval.value;
  std::vector<double> grad0 = eval.grad;

  try {
    eval = leapfrog(state.theta, state.momentum, state.mass, potential_fn,
                    cfg.leapfrog_steps, step_size, std::move(eval));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NonFiniteGradient) {
      fail(ErrorCode::DivergenceDetected,
           "non-finite potential at step " + std::to_string(state.step));
    }
    throw;
  }
  const double h1 = eval.value + detail::kinetic_energy(state.momentum, state.mass);

  StepResult res;
  res.has_accept = true;
  res.delta_h = h1 - h0;
  require(std::isfinite(res.delta_h), ErrorCode::DivergenceDetected,
          "non-finite energy at step " + std::to_string(state.step));
  res.accepted = res.delta_h <= 0.0 ||
                 state.rng.uniform() < std::exp(-res.delta_h / temp);
  if (res.accepted) {
    res.potential = eval.value;
    res.theta = state.theta;
    res.grad = std::move(eval.grad);
  } else {
    state.theta = theta0;
    state.momentum = momentum0;
    res.potential = potential0;
    res.theta = theta0;
    res.grad = std::move(grad0);
  }
  ++state.step;
  detail::check_finite_state(state, res.potential);
  return res;
}

// Cyclical cosine schedule: cycle length C = ceil(K / M_c) and
// h_t = (h0 / 2) (cos(pi (t mod C) / C) + 1).
inline double schedule_step_size(std::size_t t, const SamplerConfig& cfg) {
  const std::size_t cycle_len = (cfg.steps + cfg.cycles - 1) / cfg.cycles;
  const double phase =
      static_cast<double>(t % cycle_len) / static_cast<double>(cycle_len);
  return 0.5 * cfg.step_size * (std::cos(3.14159265358979323846 * phase) + 1.0);
}

// RMSprop-style diagonal mass adaptation from squared gradients, normalized
// to unit geometric mean. Only legal during burn-in; the mass must stay
// fixed while MH sampling runs.
inline void update_preconditioner(KernelState& state, std::span<const double> grad,
                                  const SamplerConfig& cfg) {
  const double beta = cfg.precond.beta;
  const std::size_t d = state.theta.size();
  for (std::size_t i = 0; i < d; ++i) {
    state.grad_sq_ema[i] = beta * state.grad_sq_ema[i] + (1.0 - beta) * grad[i] * grad[i];
  }
  double log_sum = 0.0;
  std::vector<double> sigma(d);
  for (std::size_t i = 0; i < d; ++i) {
    sigma[i] = std::sqrt(state.grad_sq_ema[i]) + cfg.precond.damping;
    log_sum += std::log(sigma[i]);
  }
  const double geo_mean = std::exp(log_sum / static_cast<double>(d));
  for (std::size_t i = 0; i < d; ++i) state.mass[i] = sigma[i] / geo_mean;
}

struct ChainResult {
  ParamStore store;                  // layout; values hold the final state
  Matrix samples;                    // S x D, one flattened theta per row
  std::vector<ChainRecord> records;  // one per sampling step
  std::vector<double> mass;          // frozen preconditioner
  std::vector<std::string> group_names;
};

using ChainObserver = std::function<void(const KernelState&, const ChainRecord&)>;

namespace detail {

inline Batch gather_batch(const Dataset& data, std::span<const std::size_t> idx) {
  Batch b;
  b.inputs = Matrix(idx.size(), data.cols());
  if (data.task == TaskKind::Classification) {
    b.class_targets.resize(idx.size());
  } else {
    b.real_targets = Matrix(idx.size(), data.real_targets.cols);
  }
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t j = 0; j < data.cols(); ++j) {
      b.inputs(i, j) = data.inputs(idx[i], j);
    }
    if (data.task == TaskKind::Classification) {
      b.class_targets[i] = data.class_targets[idx[i]];
    } else {
      for (std::size_t j = 0; j < data.real_targets.cols; ++j) {
        b.real_targets(i, j) = data.real_targets(idx[i], j);
      }
    }
  }
  return b;
}

inline Batch full_batch(const Dataset& data) {
  std::vector<std::size_t> idx(data.rows());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return gather_batch(data, idx);
}

struct GroupLayout {
  std::size_t offset;
  std::size_t size;
};

inline std::vector<GroupLayout> group_layouts(const ParamStore& store) {
  std::vector<GroupLayout> layouts;
  std::size_t off = 0;
  for (const ParamGroup& g : store.groups) {
    layouts.push_back({off, g.size()});
    off += g.size();
  }
  return layouts;
}

inline ChainRecord make_record(const KernelState& state, const StepResult& step,
                               double step_size, bool has_momentum,
                               std::span<const GroupLayout> layouts) {
  ChainRecord rec;
  rec.step = state.step - 1;
  rec.step_size = step_size;
  rec.potential = step.potential;
  rec.has_accept = step.has_accept;
  rec.accepted = step.accepted;
  rec.delta_h = step.delta_h;
  for (const GroupLayout& gl : layouts) {
    if (has_momentum) {
      rec.kinetic_temp.push_back(kinetic_temperature(
          std::span<const double>(state.momentum.data() + gl.offset, gl.size),
          std::span<const double>(state.mass.data() + gl.offset, gl.size), gl.size));
    }
    rec.config_temp.push_back(configurational_temperature(
        std::span<const double>(step.theta.data() + gl.offset, gl.size),
        std::span<const double>(step.grad.data() + gl.offset, gl.size), gl.size));
  }
  return rec;
}

}  // namespace detail

// Runs burn-in (adapting the preconditioner when enabled, then freezing it),
// then K sampling steps under the cyclical schedule. Samples are flattened
// parameter vectors; with several cycles they are taken at the low-step-size
// end of each cycle, otherwise every `thin` steps. Fully deterministic given
// the seed.
inline ChainResult run_chain(const ModelSpec& model, const PriorSpec& prior,
                             const Dataset& train, const SamplerConfig& cfg,
                             std::size_t max_samples = static_cast<std::size_t>(-1),
                             const ChainObserver& observer = nullptr) {
  validate(model);
  validate(prior);
  validate(cfg);
  require(train.rows() >= 1, ErrorCode::InvalidConfig, "empty training set");

  const std::size_t n = train.rows();
  const std::size_t batch =
      (cfg.batch_size == 0 || cfg.batch_size >= n) ? n : cfg.batch_size;
  const bool stochastic = batch < n;
  if (cfg.kind == SamplerKind::Hmc && stochastic) {
    fail(ErrorCode::RequiresFullBatch,
         "hmc needs the exact potential; set batch_size to 0 or the dataset size");
  }

  ChainResult result;
  Rng init_rng(cfg.seed);
  result.store = init_params(model, prior, init_rng);
  result.group_names = result.store.group_names();
  const std::vector<detail::GroupLayout> layouts = detail::group_layouts(result.store);

  KernelState state(result.store.flatten(), cfg.seed + 0x9e3779b97f4a7c15ULL);
  const bool has_momentum = cfg.kind != SamplerKind::Sgld;

  const Batch full = detail::full_batch(train);
  Batch scratch;
  const PotentialFn potential_fn = [&](std::span<const double> theta) {
    const Batch& b = stochastic ? scratch : full;
    PotentialResult pr = potential(model, result.store, theta, b, n);
    return PotentialEval{pr.potential, std::move(pr.grad)};
  };

  const auto run_step = [&](double h) {
    if (stochastic) {
      scratch = detail::gather_batch(train, state.rng.sample_indices(n, batch));
    }
    switch (cfg.kind) {
      case SamplerKind::Sgld: return sgld_step(state, potential_fn, cfg, h);
      case SamplerKind::Ggmc: return ggmc_step(state, potential_fn, cfg, h);
      case SamplerKind::Hmc: return hmc_round(state, potential_fn, cfg, h);
    }
    fail(ErrorCode::InvalidConfig, "unknown sampler kind");
  };

  for (std::size_t t = 0; t < cfg.burn_in; ++t) {
    const StepResult step = run_step(cfg.step_size);
    if (cfg.precond.enabled) update_preconditioner(state, step.grad, cfg);
  }
  // Mass is frozen from here on; MH validity requires it fixed.

  const std::size_t cycle_len = (cfg.steps + cfg.cycles - 1) / cfg.cycles;
  const std::size_t thin = cfg.thin == 0 ? 1 : cfg.thin;
  std::vector<std::vector<double>> collected;
  std::size_t collect_counter = 0;
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    const double h = schedule_step_size(t, cfg);
    const StepResult step = run_step(h);
    ChainRecord rec = detail::make_record(state, step, h, has_momentum, layouts);
    if (observer) observer(state, rec);
    result.records.push_back(std::move(rec));

    const bool cycle_point = cfg.cycles > 1
                                 ? (t % cycle_len == cycle_len - 1 || t + 1 == cfg.steps)
                                 : ((t + 1) % thin == 0);
    if (cycle_point && max_samples > 0) {
      if (cfg.cycles > 1) {
        // Thinning counts cycle ends when cycles drive collection.
        ++collect_counter;
        if (collect_counter % thin != 0) continue;
      }
      collected.push_back(state.theta);
    }
  }

  if (collected.size() > max_samples) {
    collected.erase(collected.begin(),
                    collected.end() - static_cast<std::ptrdiff_t>(max_samples));
  }
  result.samples = Matrix(collected.size(), state.theta.size());
  for (std::size_t i = 0; i < collected.size(); ++i) {
    std::copy(collected[i].begin(), collected[i].end(), result.samples.row(i).begin());
  }
  result.store.set_flat(state.theta);
  result.mass = state.mass;
  return result;
}

}  // namespace bnnmc
