#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bnnmc/errors.hpp"
#include "bnnmc/linalg.hpp"
#include "bnnmc/prior.hpp"
#include "bnnmc/rng.hpp"

namespace bnnmc {

enum class Architecture { Linear, Mlp };
enum class Activation { Tanh, Relu };
enum class Likelihood { Categorical, GaussianRegression };

struct ModelSpec {
  Architecture arch = Architecture::Mlp;
  std::vector<std::size_t> widths;  // input, hidden..., output
  Activation activation = Activation::Tanh;
  Likelihood likelihood = Likelihood::Categorical;
  double noise_sigma = 1.0;  // observation std for GaussianRegression
};

inline void validate(const ModelSpec& spec) {
  require(spec.widths.size() >= 2, ErrorCode::InvalidConfig,
          "model needs at least input and output widths");
  for (std::size_t w : spec.widths) {
    require(w >= 1, ErrorCode::InvalidConfig, "model widths must be >= 1");
  }
  if (spec.arch == Architecture::Linear) {
    require(spec.widths.size() == 2, ErrorCode::InvalidConfig,
            "linear model takes exactly {input, output} widths");
  }
  if (spec.likelihood == Likelihood::GaussianRegression) {
    require(spec.noise_sigma > 0.0, ErrorCode::InvalidConfig,
            "noise_sigma must be strictly positive");
  }
}

// Named parameter group: a flat value vector with a shape, bound to a prior.
// Hierarchical hyperparameter coordinates get their own single-value groups,
// flagged and appended after all weight groups.
struct ParamGroup {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
  PriorSpec prior;
  bool is_hyperparameter = false;
  HyperTransform transform = HyperTransform::Identity;
  std::vector<std::size_t> hyper_groups;  // indices of this group's hyper coords

  std::size_t size() const { return values.size(); }
};

struct ParamStore {
  std::vector<ParamGroup> groups;

  std::size_t dim() const {
    std::size_t d = 0;
    for (const ParamGroup& g : groups) d += g.size();
    return d;
  }

  std::size_t group_offset(std::size_t idx) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < idx; ++i) off += groups[i].size();
    return off;
  }

  // Fixed flattening order: group order, row-major within each group.
  std::vector<double> flatten() const {
    std::vector<double> flat;
    flat.reserve(dim());
    for (const ParamGroup& g : groups) {
      flat.insert(flat.end(), g.values.begin(), g.values.end());
    }
    return flat;
  }

  void set_flat(std::span<const double> flat) {
    require(flat.size() == dim(), ErrorCode::DimensionMismatch,
            "flat vector length does not match store dimension");
    std::size_t off = 0;
    for (ParamGroup& g : groups) {
      std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                flat.begin() + static_cast<std::ptrdiff_t>(off + g.size()),
                g.values.begin());
      off += g.size();
    }
  }

  std::vector<std::string> group_names() const {
    std::vector<std::string> names;
    names.reserve(groups.size());
    for (const ParamGroup& g : groups) names.push_back(g.name);
    return names;
  }
};

// Chooses the prior for a weight group; lets heterogeneous bindings (e.g.
// per-group multivariate priors) share the init path.
using PriorBinder = std::function<PriorSpec(const std::string& group, std::size_t size)>;

namespace detail {

inline std::size_t layer_count(const ModelSpec& spec) { return spec.widths.size() - 1; }

struct LayerView {
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
  std::size_t in = 0;
  std::size_t out = 0;
};

// Weight groups come first and in a fixed order, so the layer views depend
// only on the model spec.
inline std::vector<LayerView> layer_views(const ModelSpec& spec) {
  std::vector<LayerView> views;
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer_count(spec); ++l) {
    LayerView v;
    v.in = spec.widths[l];
    v.out = spec.widths[l + 1];
    v.weight_offset = off;
    off += v.in * v.out;
    v.bias_offset = off;
    off += v.out;
    views.push_back(v);
  }
  return views;
}

inline double activate(Activation a, double z) {
  return a == Activation::Tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

// Derivative expressed through the activation value (sufficient for both
// tanh and relu).
inline double activate_grad(Activation a, double value) {
  return a == Activation::Tanh ? 1.0 - value * value : (value > 0.0 ? 1.0 : 0.0);
}

}  // namespace detail

inline ParamStore init_params(const ModelSpec& model, const PriorBinder& binder, Rng& rng) {
  validate(model);
  ParamStore store;
  struct PendingHyper {
    std::size_t parent;
    HyperSlot slot;
    double coord;
  };
  std::vector<PendingHyper> pending;

  for (std::size_t l = 0; l + 1 < model.widths.size(); ++l) {
    const std::size_t in = model.widths[l];
    const std::size_t out = model.widths[l + 1];
    const std::string base = "layer" + std::to_string(l);
    const struct {
      std::string name;
      std::vector<std::size_t> shape;
    } specs[2] = {{base + ".weight", {out, in}}, {base + ".bias", {out}}};

    for (const auto& gs : specs) {
      ParamGroup g;
      g.name = gs.name;
      g.shape = gs.shape;
      std::size_t size = 1;
      for (std::size_t s : gs.shape) size *= s;
      g.values.resize(size);
      g.prior = binder(g.name, size);
      validate(g.prior);
      const std::size_t p = g.prior.dim();
      require(p == 0 || p == size, ErrorCode::DimensionMismatch,
              g.name + ": prior dimension " + std::to_string(p) +
                  " does not match group size " + std::to_string(size));
      if (g.prior.kind == PriorKind::Hierarchical) {
        const std::vector<double> coords = sample_hyper_coords(g.prior, rng);
        const std::vector<HyperSlot> slots = hyper_slots(g.prior);
        sample_into(resolve_base(g.prior, coords), rng,
                    std::span<double>(g.values.data(), g.values.size()));
        const std::size_t parent = store.groups.size();
        for (std::size_t s = 0; s < slots.size(); ++s) {
          pending.push_back({parent, slots[s], coords[s]});
        }
      } else {
        sample_into(g.prior, rng, std::span<double>(g.values.data(), g.values.size()));
      }
      store.groups.push_back(std::move(g));
    }
  }

  for (const PendingHyper& ph : pending) {
    ParamGroup g;
    g.name = store.groups[ph.parent].name + "." + ph.slot.name;
    g.shape = {1};
    g.values = {ph.coord};
    g.prior = ph.slot.prior;
    g.is_hyperparameter = true;
    g.transform = ph.slot.transform;
    store.groups[ph.parent].hyper_groups.push_back(store.groups.size());
    store.groups.push_back(std::move(g));
  }
  return store;
}

inline ParamStore init_params(const ModelSpec& model, const PriorSpec& prior, Rng& rng) {
  return init_params(
      model, [&prior](const std::string&, std::size_t) { return prior; }, rng);
}

namespace detail {

// Forward pass over a batch for an arbitrary flat parameter vector; fills
// per-layer activations when a backward pass will follow.
inline void forward_into(const ModelSpec& spec, std::span<const double> theta,
                         const Matrix& inputs, std::vector<Matrix>* activations,
                         Matrix& output) {
  const std::vector<LayerView> views = layer_views(spec);
  require(inputs.cols == spec.widths.front(), ErrorCode::DimensionMismatch,
          "input width " + std::to_string(inputs.cols) + " does not match model width " +
              std::to_string(spec.widths.front()));
  const std::size_t n = inputs.rows;
  Matrix current = inputs;
  if (activations) activations->push_back(current);
  for (std::size_t l = 0; l < views.size(); ++l) {
    const LayerView& v = views[l];
    Matrix next(n, v.out);
    for (std::size_t i = 0; i < n; ++i) {
      const std::span<const double> row = current.row(i);
      for (std::size_t o = 0; o < v.out; ++o) {
        double z = theta[v.bias_offset + o];
        const double* w = theta.data() + v.weight_offset + o * v.in;
        for (std::size_t j = 0; j < v.in; ++j) z += w[j] * row[j];
        next(i, o) = z;
      }
    }
    const bool last = l + 1 == views.size();
    if (!last) {
      for (double& z : next.data) z = activate(spec.activation, z);
    }
    if (activations && !last) activations->push_back(next);
    current = std::move(next);
  }
  output = std::move(current);
}

}  // namespace detail

// Deterministic model outputs: logits for Categorical, means for regression.
inline Matrix forward(const ModelSpec& spec, std::span<const double> theta,
                      const Matrix& inputs) {
  Matrix out;
  detail::forward_into(spec, theta, inputs, nullptr, out);
  return out;
}

inline Matrix forward(const ModelSpec& spec, const ParamStore& store, const Matrix& inputs) {
  const std::vector<double> theta = store.flatten();
  return forward(spec, theta, inputs);
}

struct Batch {
  Matrix inputs;
  std::vector<int> class_targets;
  Matrix real_targets;

  std::size_t size() const { return inputs.rows; }
};

struct PotentialResult {
  double potential = 0.0;            // U = -log_lik - log_prior
  std::vector<double> grad;          // dU/dtheta, length D
  double log_prior = 0.0;
  double log_lik = 0.0;              // minibatch-scaled estimate
};

namespace detail {

// Log likelihood of the batch plus dL/d(output) for the backward pass.
inline double likelihood_terms(const ModelSpec& spec, const Matrix& output,
                               const Batch& batch, Matrix& dout) {
  const std::size_t n = output.rows;
  dout = Matrix(n, output.cols);
  double loglik = 0.0;
  if (spec.likelihood == Likelihood::Categorical) {
    require(batch.class_targets.size() == n, ErrorCode::DimensionMismatch,
            "batch targets do not match batch inputs");
    for (std::size_t i = 0; i < n; ++i) {
      const std::span<const double> logits = output.row(i);
      const int y = batch.class_targets[i];
      require(y >= 0 && static_cast<std::size_t>(y) < output.cols,
              ErrorCode::DimensionMismatch,
              "class label " + std::to_string(y) + " outside model output range");
      double mx = logits[0];
      for (double v : logits) mx = std::max(mx, v);
      double sum = 0.0;
      for (double v : logits) sum += std::exp(v - mx);
      const double lse = mx + std::log(sum);
      loglik += logits[static_cast<std::size_t>(y)] - lse;
      for (std::size_t c = 0; c < output.cols; ++c) {
        const double softmax = std::exp(logits[c] - lse);
        dout(i, c) = softmax - (static_cast<std::size_t>(y) == c ? 1.0 : 0.0);
      }
    }
  } else {
    require(batch.real_targets.rows == n && batch.real_targets.cols == output.cols,
            ErrorCode::DimensionMismatch, "regression targets do not match outputs");
    const double s2 = spec.noise_sigma * spec.noise_sigma;
    const double log_norm = -0.5 * kLogTwoPi - std::log(spec.noise_sigma);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < output.cols; ++c) {
        const double r = output(i, c) - batch.real_targets(i, c);
        loglik += log_norm - 0.5 * r * r / s2;
        dout(i, c) = r / s2;  // d(-loglik)/d(mean)
      }
    }
  }
  return loglik;
}

}  // namespace detail

// Tempered-free potential energy U(theta) with exact reverse-mode gradients:
// U = -(N/|B|) * sum_batch log p(y|x,theta) - log p(theta). Temperature is a
// sampler concern and never enters here. The full-batch call (|B| = N) gives
// the exact potential.
inline PotentialResult potential(const ModelSpec& spec, const ParamStore& store,
                                 std::span<const double> theta, const Batch& batch,
                                 std::size_t dataset_size) {
  require(batch.size() >= 1, ErrorCode::InvalidConfig, "potential: empty batch");
  require(dataset_size >= batch.size(), ErrorCode::InvalidConfig,
          "potential: dataset size smaller than batch");
  require(theta.size() == store.dim(), ErrorCode::DimensionMismatch,
          "theta length does not match parameter store");

  PotentialResult res;
  res.grad.assign(theta.size(), 0.0);
  const double scale =
      static_cast<double>(dataset_size) / static_cast<double>(batch.size());

  // Likelihood part with backprop through the layers.
  std::vector<Matrix> activations;
  Matrix output;
  detail::forward_into(spec, theta, batch.inputs, &activations, output);
  Matrix delta;
  const double raw_loglik = detail::likelihood_terms(spec, output, batch, delta);
  res.log_lik = scale * raw_loglik;
  for (double& d : delta.data) d *= scale;  // delta now holds dU/d(output)

  const std::vector<detail::LayerView> views = detail::layer_views(spec);
  const std::size_t n = batch.size();
  for (std::size_t l = views.size(); l-- > 0;) {
    const detail::LayerView& v = views[l];
    const Matrix& input = activations[l];
    for (std::size_t i = 0; i < n; ++i) {
      const std::span<const double> in_row = input.row(i);
      const std::span<const double> d_row = delta.row(i);
      for (std::size_t o = 0; o < v.out; ++o) {
        const double d = d_row[o];
        if (d == 0.0) continue;
        double* wgrad = res.grad.data() + v.weight_offset + o * v.in;
        for (std::size_t j = 0; j < v.in; ++j) wgrad[j] += d * in_row[j];
        res.grad[v.bias_offset + o] += d;
      }
    }
    if (l == 0) break;
    Matrix prev_delta(n, v.in);
    for (std::size_t i = 0; i < n; ++i) {
      const std::span<const double> d_row = delta.row(i);
      for (std::size_t j = 0; j < v.in; ++j) {
        double s = 0.0;
        for (std::size_t o = 0; o < v.out; ++o) {
          s += d_row[o] * theta[v.weight_offset + o * v.in + j];
        }
        const double a = activations[l](i, j);
        prev_delta(i, j) = s * detail::activate_grad(spec.activation, a);
      }
    }
    delta = std::move(prev_delta);
  }

  // Prior part: every group contributes its log density; hierarchical groups
  // are evaluated jointly with their hyper coordinates.
  std::size_t off = 0;
  std::vector<std::size_t> offsets(store.groups.size());
  for (std::size_t gi = 0; gi < store.groups.size(); ++gi) {
    offsets[gi] = off;
    off += store.groups[gi].size();
  }
  double log_prior = 0.0;
  for (std::size_t gi = 0; gi < store.groups.size(); ++gi) {
    const ParamGroup& g = store.groups[gi];
    if (g.is_hyperparameter) continue;  // handled with its parent
    const std::span<const double> vals = theta.subspan(offsets[gi], g.size());
    if (g.prior.kind == PriorKind::Hierarchical) {
      std::vector<double> coords(g.hyper_groups.size());
      for (std::size_t s = 0; s < g.hyper_groups.size(); ++s) {
        coords[s] = theta[offsets[g.hyper_groups[s]]];
      }
      const HierarchicalResult hr = hierarchical_log_density(g.prior, vals, coords);
      log_prior += hr.value;
      for (std::size_t i = 0; i < g.size(); ++i) {
        res.grad[offsets[gi] + i] -= hr.gradient[i];
      }
      for (std::size_t s = 0; s < g.hyper_groups.size(); ++s) {
        res.grad[offsets[g.hyper_groups[s]]] -= hr.hyper_gradient[s];
      }
    } else {
      const LogDensityResult r = log_density(g.prior, vals);
      log_prior += r.value;
      for (std::size_t i = 0; i < g.size(); ++i) {
        res.grad[offsets[gi] + i] -= r.gradient[i];
      }
    }
  }
  res.log_prior = log_prior;
  res.potential = -res.log_lik - log_prior;

  require(std::isfinite(res.potential), ErrorCode::NonFiniteGradient,
          "potential is not finite");
  for (double gv : res.grad) {
    require(std::isfinite(gv), ErrorCode::NonFiniteGradient,
            "potential gradient is not finite");
  }
  return res;
}

inline PotentialResult potential(const ModelSpec& spec, const ParamStore& store,
                                 const Batch& batch, std::size_t dataset_size) {
  const std::vector<double> theta = store.flatten();
  return potential(spec, store, theta, batch, dataset_size);
}

struct PredictiveResult {
  Likelihood likelihood = Likelihood::Categorical;
  Matrix probs;     // classification: n x C class probabilities
  Matrix mean;      // regression: n x outputs
  Matrix variance;  // regression: n x outputs
};

// Bayesian model average over posterior weight samples: mean softmax for
// classification, Gaussian-mixture mean/variance for regression.
inline PredictiveResult log_predictive(const ModelSpec& spec, const ParamStore& store,
                                       const Matrix& samples, const Matrix& inputs) {
  require(samples.rows >= 1, ErrorCode::EmptyArchive, "no posterior samples");
  require(samples.cols == store.dim(), ErrorCode::DimensionMismatch,
          "sample width does not match parameter store");
  const std::size_t n = inputs.rows;
  const std::size_t s_count = samples.rows;
  PredictiveResult res;
  res.likelihood = spec.likelihood;

  if (spec.likelihood == Likelihood::Categorical) {
    const std::size_t c_count = spec.widths.back();
    res.probs = Matrix(n, c_count);
    for (std::size_t s = 0; s < s_count; ++s) {
      const Matrix logits = forward(spec, samples.row(s), inputs);
      for (std::size_t i = 0; i < n; ++i) {
        const std::span<const double> row = logits.row(i);
        double mx = row[0];
        for (double v : row) mx = std::max(mx, v);
        double sum = 0.0;
        for (double v : row) sum += std::exp(v - mx);
        for (std::size_t c = 0; c < c_count; ++c) {
          res.probs(i, c) += std::exp(row[c] - mx) / sum / static_cast<double>(s_count);
        }
      }
    }
  } else {
    const std::size_t out = spec.widths.back();
    res.mean = Matrix(n, out);
    res.variance = Matrix(n, out);
    Matrix sq(n, out);
    for (std::size_t s = 0; s < s_count; ++s) {
      const Matrix m = forward(spec, samples.row(s), inputs);
      for (std::size_t i = 0; i < n * out; ++i) {
        res.mean.data[i] += m.data[i] / static_cast<double>(s_count);
        sq.data[i] += m.data[i] * m.data[i] / static_cast<double>(s_count);
      }
    }
    const double s2 = spec.noise_sigma * spec.noise_sigma;
    for (std::size_t i = 0; i < n * out; ++i) {
      res.variance.data[i] =
          std::max(0.0, sq.data[i] - res.mean.data[i] * res.mean.data[i]) + s2;
    }
  }
  return res;
}

}  // namespace bnnmc
