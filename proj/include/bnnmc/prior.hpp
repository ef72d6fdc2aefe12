#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bnnmc/errors.hpp"
#include "bnnmc/linalg.hpp"
#include "bnnmc/rng.hpp"

namespace bnnmc {

enum class PriorKind {
  Gaussian,
  Laplace,
  StudentT,
  Cauchy,
  MultivariateGaussian,
  MultivariateT,
  Hierarchical,
  Mixture,
};

inline const char* prior_kind_name(PriorKind k) {
  switch (k) {
    case PriorKind::Gaussian: return "gaussian";
    case PriorKind::Laplace: return "laplace";
    case PriorKind::StudentT: return "student_t";
    case PriorKind::Cauchy: return "cauchy";
    case PriorKind::MultivariateGaussian: return "multivariate_gaussian";
    case PriorKind::MultivariateT: return "multivariate_t";
    case PriorKind::Hierarchical: return "hierarchical";
    case PriorKind::Mixture: return "mixture";
  }
  return "unknown";
}

inline bool is_univariate_location_scale(PriorKind k) {
  return k == PriorKind::Gaussian || k == PriorKind::Laplace ||
         k == PriorKind::StudentT || k == PriorKind::Cauchy;
}

// Recursive description of a prior. Univariate kinds apply elementwise to a
// parameter vector; multivariate kinds fix a dimension p. A mixture holds
// component specs plus weights, and a hierarchical prior holds its base
// distribution in components[0] with each governed hyperparameter bound to
// its own PriorSpec in `hyperpriors`.
struct PriorSpec {
  PriorKind kind = PriorKind::Gaussian;
  std::map<std::string, double> params;       // loc / scale / dof
  std::vector<double> mean;                   // multivariate location
  Matrix cov;                                 // multivariate covariance, p x p
  std::vector<PriorSpec> components;          // mixture components; hierarchical base
  std::vector<double> weights;                // mixture weights (normalized on use)
  std::map<std::string, PriorSpec> hyperpriors;

  double param(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) {
      fail(ErrorCode::DomainError, std::string(prior_kind_name(kind)) +
                                       " prior is missing parameter '" + name + "'");
    }
    return it->second;
  }

  double param_or(const std::string& name, double fallback) const {
    auto it = params.find(name);
    return it == params.end() ? fallback : it->second;
  }

  // 0 means "applies elementwise to any length"; otherwise the fixed length p.
  std::size_t dim() const {
    switch (kind) {
      case PriorKind::MultivariateGaussian:
      case PriorKind::MultivariateT:
        return mean.size();
      case PriorKind::Mixture:
        return components.empty() ? 0 : components.front().dim();
      case PriorKind::Hierarchical:
        return components.empty() ? 0 : components.front().dim();
      default:
        return 0;
    }
  }

  static PriorSpec gaussian(double loc, double scale) {
    PriorSpec s;
    s.kind = PriorKind::Gaussian;
    s.params = {{"loc", loc}, {"scale", scale}};
    return s;
  }

  static PriorSpec laplace(double loc, double scale) {
    PriorSpec s;
    s.kind = PriorKind::Laplace;
    s.params = {{"loc", loc}, {"scale", scale}};
    return s;
  }

  static PriorSpec student_t(double dof, double loc, double scale) {
    PriorSpec s;
    s.kind = PriorKind::StudentT;
    s.params = {{"dof", dof}, {"loc", loc}, {"scale", scale}};
    return s;
  }

  static PriorSpec cauchy(double loc, double scale) {
    PriorSpec s;
    s.kind = PriorKind::Cauchy;
    s.params = {{"loc", loc}, {"scale", scale}};
    return s;
  }

  static PriorSpec multivariate_gaussian(std::vector<double> mu, Matrix sigma) {
    PriorSpec s;
    s.kind = PriorKind::MultivariateGaussian;
    s.mean = std::move(mu);
    s.cov = std::move(sigma);
    return s;
  }

  static PriorSpec multivariate_t(double dof, std::vector<double> mu, Matrix sigma) {
    PriorSpec s;
    s.kind = PriorKind::MultivariateT;
    s.params = {{"dof", dof}};
    s.mean = std::move(mu);
    s.cov = std::move(sigma);
    return s;
  }

  static PriorSpec mixture(std::vector<PriorSpec> comps, std::vector<double> w = {}) {
    PriorSpec s;
    s.kind = PriorKind::Mixture;
    s.components = std::move(comps);
    s.weights = std::move(w);
    return s;
  }

  static PriorSpec hierarchical(PriorSpec base, std::map<std::string, PriorSpec> hypers) {
    PriorSpec s;
    s.kind = PriorKind::Hierarchical;
    s.components.push_back(std::move(base));
    s.hyperpriors = std::move(hypers);
    return s;
  }
};

struct LogDensityResult {
  double value = 0.0;
  std::vector<double> gradient;
};

enum class HyperTransform { Identity, Log };

// One unconstrained scalar coordinate of a hierarchical prior. Scale-type
// hyperparameters live on the log scale so joint gradient-based sampling is
// unconstrained; the Jacobian log|dsigma/dlog sigma| = log sigma enters the
// joint density.
struct HyperSlot {
  std::string name;  // dotted path, e.g. "scale" or "scale.loc"
  HyperTransform transform = HyperTransform::Identity;
  PriorSpec prior;
};

namespace detail {

constexpr double kLogTwoPi = 1.8378770664093454836;
constexpr double kPi = 3.14159265358979323846;
constexpr int kMaxHierarchyDepth = 64;

inline HyperTransform transform_for(const std::string& name) {
  return name == "scale" ? HyperTransform::Log : HyperTransform::Identity;
}

// Per-coordinate log density of a univariate kind together with its
// derivatives in the coordinate, the location, and the scale.
struct UnivariateTerms {
  double value = 0.0;
  double dx = 0.0;
  double dloc = 0.0;
  double dscale = 0.0;
};

inline UnivariateTerms univariate_terms(PriorKind kind, double x, double loc,
                                        double scale, double dof) {
  UnivariateTerms t;
  switch (kind) {
    case PriorKind::Gaussian: {
      const double z = (x - loc) / scale;
      t.value = -0.5 * kLogTwoPi - std::log(scale) - 0.5 * z * z;
      t.dx = -z / scale;
      t.dloc = z / scale;
      t.dscale = (z * z - 1.0) / scale;
      break;
    }
    case PriorKind::Laplace: {
      const double d = x - loc;
      const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      t.value = -std::log(2.0 * scale) - std::abs(d) / scale;
      t.dx = -s / scale;
      t.dloc = s / scale;
      t.dscale = (std::abs(d) / scale - 1.0) / scale;
      break;
    }
    case PriorKind::StudentT: {
      const double z = (x - loc) / scale;
      const double q = dof + z * z;
      t.value = std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) -
                0.5 * std::log(dof * kPi) - std::log(scale) -
                0.5 * (dof + 1.0) * std::log1p(z * z / dof);
      t.dx = -(dof + 1.0) * z / (scale * q);
      t.dloc = (dof + 1.0) * z / (scale * q);
      t.dscale = (-1.0 + (dof + 1.0) * z * z / q) / scale;
      break;
    }
    case PriorKind::Cauchy: {
      const double z = (x - loc) / scale;
      const double q = 1.0 + z * z;
      t.value = -std::log(kPi * scale) - std::log1p(z * z);
      t.dx = -2.0 * z / (scale * q);
      t.dloc = 2.0 * z / (scale * q);
      t.dscale = (-1.0 + 2.0 * z * z / q) / scale;
      break;
    }
    default:
      fail(ErrorCode::DomainError, "univariate_terms: not a univariate kind");
  }
  return t;
}

inline void validate_impl(const PriorSpec& spec, const std::string& path, int depth);

}  // namespace detail

// Checks every invariant of the prior tree recursively; throws with the
// offending path on failure.
inline void validate(const PriorSpec& spec) { detail::validate_impl(spec, "$", 0); }

namespace detail {

inline void validate_impl(const PriorSpec& spec, const std::string& path, int depth) {
  if (depth > kMaxHierarchyDepth) {
    fail(ErrorCode::CyclicHierarchy, path + ": prior nesting exceeds depth " +
                                         std::to_string(kMaxHierarchyDepth));
  }
  switch (spec.kind) {
    case PriorKind::Gaussian:
    case PriorKind::Laplace:
    case PriorKind::Cauchy:
    case PriorKind::StudentT: {
      const double scale = spec.param_or("scale", 1.0);
      if (!(scale > 0.0) || !std::isfinite(scale)) {
        fail(ErrorCode::NonPositiveScale,
             path + ": scale must be strictly positive, got " + std::to_string(scale));
      }
      if (spec.kind == PriorKind::StudentT) {
        const double dof = spec.param("dof");
        if (!(dof > 0.0) || !std::isfinite(dof)) {
          fail(ErrorCode::DomainError,
               path + ": dof must be strictly positive, got " + std::to_string(dof));
        }
      }
      break;
    }
    case PriorKind::MultivariateGaussian:
    case PriorKind::MultivariateT: {
      if (spec.mean.empty()) {
        fail(ErrorCode::DimensionMismatch, path + ": multivariate prior needs a mean vector");
      }
      if (spec.cov.rows != spec.mean.size() || spec.cov.cols != spec.mean.size()) {
        fail(ErrorCode::DimensionMismatch,
             path + ": covariance shape does not match mean length " +
                 std::to_string(spec.mean.size()));
      }
      double max_abs = 0.0;
      for (double v : spec.cov.data) max_abs = std::max(max_abs, std::abs(v));
      for (std::size_t i = 0; i < spec.cov.rows; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
          if (std::abs(spec.cov(i, j) - spec.cov(j, i)) > 1e-9 * std::max(1.0, max_abs)) {
            fail(ErrorCode::NonPSDCovariance, path + ": covariance is not symmetric");
          }
        }
      }
      if (!cholesky(spec.cov)) {
        fail(ErrorCode::NonPSDCovariance, path + ": covariance has no Cholesky factor");
      }
      if (spec.kind == PriorKind::MultivariateT) {
        const double dof = spec.param("dof");
        if (!(dof > 0.0) || !std::isfinite(dof)) {
          fail(ErrorCode::DomainError, path + ": dof must be strictly positive");
        }
      }
      break;
    }
    case PriorKind::Mixture: {
      if (spec.components.empty()) {
        fail(ErrorCode::EmptyMixture, path + ": mixture has no components");
      }
      if (!spec.weights.empty() && spec.weights.size() != spec.components.size()) {
        fail(ErrorCode::DimensionMismatch,
             path + ": weight count does not match component count");
      }
      double sum = 0.0;
      for (std::size_t i = 0; i < spec.weights.size(); ++i) {
        const double w = spec.weights[i];
        if (!(w >= 0.0) || !std::isfinite(w)) {
          fail(ErrorCode::NegativeWeight,
               path + ".weights[" + std::to_string(i) + "] = " + std::to_string(w));
        }
        sum += w;
      }
      if (!spec.weights.empty() && sum <= 0.0) {
        fail(ErrorCode::NegativeWeight, path + ": mixture weights sum to zero");
      }
      const std::size_t p = spec.components.front().dim();
      for (std::size_t i = 0; i < spec.components.size(); ++i) {
        const std::string cpath = path + ".components[" + std::to_string(i) + "]";
        if (spec.components[i].kind == PriorKind::Hierarchical) {
          fail(ErrorCode::DomainError, cpath + ": hierarchical priors cannot be mixture components");
        }
        if (spec.components[i].dim() != p) {
          fail(ErrorCode::DimensionMismatch, cpath + ": mixture components must share one dimension");
        }
        validate_impl(spec.components[i], cpath, depth + 1);
      }
      break;
    }
    case PriorKind::Hierarchical: {
      if (spec.components.size() != 1) {
        fail(ErrorCode::DomainError, path + ": hierarchical prior needs exactly one base component");
      }
      const PriorSpec& base = spec.components.front();
      if (!is_univariate_location_scale(base.kind)) {
        fail(ErrorCode::DomainError,
             path + ": hierarchical base must be a univariate location-scale kind");
      }
      validate_impl(base, path + ".base", depth + 1);
      for (const auto& [name, hp] : spec.hyperpriors) {
        const std::string hpath = path + ".hyperpriors." + name;
        if (name != "loc" && name != "scale") {
          fail(ErrorCode::DomainError,
               hpath + ": only 'loc' and 'scale' hyperparameters can carry priors");
        }
        if (hp.dim() != 0) {
          fail(ErrorCode::DimensionMismatch, hpath + ": hyperpriors must be univariate");
        }
        validate_impl(hp, hpath, depth + 1);
      }
      break;
    }
  }
}

// Normalized mixture weights (equal when unspecified).
inline std::vector<double> mixture_weights(const PriorSpec& spec) {
  const std::size_t k = spec.components.size();
  std::vector<double> w(k, 1.0 / static_cast<double>(k));
  if (!spec.weights.empty()) {
    double sum = 0.0;
    for (double v : spec.weights) sum += v;
    for (std::size_t i = 0; i < k; ++i) w[i] = spec.weights[i] / sum;
  }
  return w;
}

}  // namespace detail

inline LogDensityResult log_density(const PriorSpec& spec, std::span<const double> theta);

namespace detail {

inline LogDensityResult mixture_log_density(const PriorSpec& spec,
                                            std::span<const double> theta) {
  const std::vector<double> w = mixture_weights(spec);
  const std::size_t k = spec.components.size();
  LogDensityResult out;
  out.gradient.assign(theta.size(), 0.0);

  const std::size_t p = spec.dim();
  if (p == 0) {
    // Elementwise mixture of univariate components, value summed over coords.
    std::vector<double> terms(k);
    std::vector<double> grads(k);
    for (std::size_t c = 0; c < theta.size(); ++c) {
      double mx = -HUGE_VAL;
      for (std::size_t i = 0; i < k; ++i) {
        if (w[i] == 0.0) {
          terms[i] = -HUGE_VAL;
          grads[i] = 0.0;
          continue;
        }
        const LogDensityResult r = log_density(spec.components[i], theta.subspan(c, 1));
        terms[i] = std::log(w[i]) + r.value;
        grads[i] = r.gradient[0];
        mx = std::max(mx, terms[i]);
      }
      double sum = 0.0;
      for (std::size_t i = 0; i < k; ++i) sum += std::exp(terms[i] - mx);
      const double lse = mx + std::log(sum);
      out.value += lse;
      double g = 0.0;
      for (std::size_t i = 0; i < k; ++i) g += std::exp(terms[i] - lse) * grads[i];
      out.gradient[c] = g;
    }
    return out;
  }

  // Joint mixture over a fixed-dimension vector.
  require(theta.size() == p, ErrorCode::DimensionMismatch,
          "mixture expects length " + std::to_string(p));
  std::vector<double> terms(k);
  std::vector<LogDensityResult> rs(k);
  double mx = -HUGE_VAL;
  for (std::size_t i = 0; i < k; ++i) {
    if (w[i] == 0.0) {
      terms[i] = -HUGE_VAL;
      continue;
    }
    rs[i] = log_density(spec.components[i], theta);
    terms[i] = std::log(w[i]) + rs[i].value;
    mx = std::max(mx, terms[i]);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += std::exp(terms[i] - mx);
  out.value = mx + std::log(sum);
  for (std::size_t i = 0; i < k; ++i) {
    if (w[i] == 0.0) continue;
    const double resp = std::exp(terms[i] - out.value);
    for (std::size_t c = 0; c < p; ++c) out.gradient[c] += resp * rs[i].gradient[c];
  }
  return out;
}

}  // namespace detail

// Exact normalized log density and its gradient in theta. Univariate kinds
// apply elementwise with the value summed over coordinates. Hierarchical
// specs need hyperparameter values; see hierarchical_log_density.
inline LogDensityResult log_density(const PriorSpec& spec, std::span<const double> theta) {
  LogDensityResult out;
  out.gradient.assign(theta.size(), 0.0);
  switch (spec.kind) {
    case PriorKind::Gaussian:
    case PriorKind::Laplace:
    case PriorKind::StudentT:
    case PriorKind::Cauchy: {
      const double loc = spec.param_or("loc", 0.0);
      const double scale = spec.param_or("scale", 1.0);
      const double dof = spec.kind == PriorKind::StudentT ? spec.param("dof") : 0.0;
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const detail::UnivariateTerms t =
            detail::univariate_terms(spec.kind, theta[i], loc, scale, dof);
        out.value += t.value;
        out.gradient[i] = t.dx;
      }
      return out;
    }
    case PriorKind::MultivariateGaussian: {
      const std::size_t p = spec.mean.size();
      require(theta.size() == p, ErrorCode::DimensionMismatch,
              "multivariate gaussian expects length " + std::to_string(p));
      const auto l = cholesky(spec.cov);
      require(l.has_value(), ErrorCode::NonPSDCovariance, "covariance not PSD");
      std::vector<double> centered(p);
      for (std::size_t i = 0; i < p; ++i) centered[i] = theta[i] - spec.mean[i];
      const std::vector<double> alpha = cholesky_solve(*l, centered);
      const double quad = dot(centered, alpha);
      out.value = -0.5 * (static_cast<double>(p) * detail::kLogTwoPi +
                          cholesky_log_det(*l) + quad);
      for (std::size_t i = 0; i < p; ++i) out.gradient[i] = -alpha[i];
      return out;
    }
    case PriorKind::MultivariateT: {
      const std::size_t p = spec.mean.size();
      require(theta.size() == p, ErrorCode::DimensionMismatch,
              "multivariate t expects length " + std::to_string(p));
      const double dof = spec.param("dof");
      const auto l = cholesky(spec.cov);
      require(l.has_value(), ErrorCode::NonPSDCovariance, "covariance not PSD");
      std::vector<double> centered(p);
      for (std::size_t i = 0; i < p; ++i) centered[i] = theta[i] - spec.mean[i];
      const std::vector<double> alpha = cholesky_solve(*l, centered);
      const double quad = dot(centered, alpha);
      const double pd = static_cast<double>(p);
      out.value = std::lgamma(0.5 * (dof + pd)) - std::lgamma(0.5 * dof) -
                  0.5 * pd * std::log(dof * detail::kPi) -
                  0.5 * cholesky_log_det(*l) -
                  0.5 * (dof + pd) * std::log1p(quad / dof);
      const double coef = -(dof + pd) / (dof + quad);
      for (std::size_t i = 0; i < p; ++i) out.gradient[i] = coef * alpha[i];
      return out;
    }
    case PriorKind::Mixture:
      return detail::mixture_log_density(spec, theta);
    case PriorKind::Hierarchical:
      fail(ErrorCode::DomainError,
           "hierarchical prior needs hyperparameter values; use hierarchical_log_density");
  }
  return out;
}

// Flattened list of the unconstrained hyperparameter coordinates of a
// hierarchical prior, depth-first in name order. Nested hierarchical
// hyperpriors contribute their own slots immediately after their parent.
inline std::vector<HyperSlot> hyper_slots(const PriorSpec& spec) {
  require(spec.kind == PriorKind::Hierarchical, ErrorCode::DomainError,
          "hyper_slots: spec is not hierarchical");
  std::vector<HyperSlot> slots;
  for (const auto& [name, hp] : spec.hyperpriors) {
    slots.push_back({name, detail::transform_for(name), hp});
    if (hp.kind == PriorKind::Hierarchical) {
      for (HyperSlot sub : hyper_slots(hp)) {
        sub.name = name + "." + sub.name;
        slots.push_back(std::move(sub));
      }
    }
  }
  return slots;
}

struct HierarchicalResult {
  double value = 0.0;                // log f(theta; psi) + sum log p(psi) + Jacobians
  std::vector<double> gradient;      // d/dtheta
  std::vector<double> hyper_gradient;  // d/d(unconstrained coordinate), slot order
};

namespace detail {

// Derivative of the summed base log density with respect to one governed
// hyperparameter, at its current natural value.
inline double base_param_gradient(const PriorSpec& base, std::span<const double> theta,
                                  const std::string& name) {
  const double loc = base.param_or("loc", 0.0);
  const double scale = base.param_or("scale", 1.0);
  const double dof = base.kind == PriorKind::StudentT ? base.param("dof") : 0.0;
  double g = 0.0;
  for (double x : theta) {
    const UnivariateTerms t = univariate_terms(base.kind, x, loc, scale, dof);
    g += name == "loc" ? t.dloc : t.dscale;
  }
  return g;
}

// Number of unconstrained coordinates a hyperprior consumes (itself plus any
// nested slots).
inline std::size_t slot_width(const PriorSpec& hp) {
  std::size_t n = 1;
  if (hp.kind == PriorKind::Hierarchical) n += hyper_slots(hp).size();
  return n;
}

}  // namespace detail

// Joint log density of a hierarchical prior: the base conditional log f
// (theta; psi), each hyperparameter's own prior evaluated at its natural
// value, and the log-scale Jacobian for positivity-constrained coordinates.
// `hyper` holds the unconstrained coordinates in hyper_slots order.
inline HierarchicalResult hierarchical_log_density(const PriorSpec& spec,
                                                   std::span<const double> theta,
                                                   std::span<const double> hyper) {
  require(spec.kind == PriorKind::Hierarchical, ErrorCode::DomainError,
          "hierarchical_log_density: spec is not hierarchical");

  struct Resolved {
    const std::string* name;
    const PriorSpec* prior;
    std::size_t coord;
    std::size_t width;
    double natural;
    HyperTransform transform;
  };

  PriorSpec base = spec.components.front();
  std::vector<Resolved> tops;
  std::size_t idx = 0;
  for (const auto& [name, hp] : spec.hyperpriors) {
    require(idx < hyper.size(), ErrorCode::DimensionMismatch,
            "hierarchical prior given too few hyperparameter coordinates");
    const HyperTransform tf = detail::transform_for(name);
    const double c = hyper[idx];
    const double v = tf == HyperTransform::Log ? std::exp(c) : c;
    base.params[name] = v;
    const std::size_t width = detail::slot_width(hp);
    tops.push_back({&name, &hp, idx, width, v, tf});
    idx += width;
  }
  require(idx == hyper.size(), ErrorCode::DimensionMismatch,
          "hierarchical prior given too many hyperparameter coordinates");

  HierarchicalResult out;
  LogDensityResult base_res = log_density(base, theta);
  out.value = base_res.value;
  out.gradient = std::move(base_res.gradient);
  out.hyper_gradient.assign(hyper.size(), 0.0);

  for (const Resolved& top : tops) {
    const double dbase = detail::base_param_gradient(base, theta, *top.name);
    double dprior_dv = 0.0;
    if (top.prior->kind == PriorKind::Hierarchical) {
      const HierarchicalResult sub = hierarchical_log_density(
          *top.prior, std::span<const double>(&top.natural, 1),
          hyper.subspan(top.coord + 1, top.width - 1));
      out.value += sub.value;
      dprior_dv = sub.gradient[0];
      std::copy(sub.hyper_gradient.begin(), sub.hyper_gradient.end(),
                out.hyper_gradient.begin() + static_cast<std::ptrdiff_t>(top.coord) + 1);
    } else {
      const LogDensityResult r =
          log_density(*top.prior, std::span<const double>(&top.natural, 1));
      out.value += r.value;
      dprior_dv = r.gradient[0];
    }
    if (top.transform == HyperTransform::Log) {
      out.value += hyper[top.coord];  // Jacobian: log sigma
      out.hyper_gradient[top.coord] = (dbase + dprior_dv) * top.natural + 1.0;
    } else {
      out.hyper_gradient[top.coord] = dbase + dprior_dv;
    }
  }
  return out;
}

namespace detail {

inline double sample_univariate(const PriorSpec& spec, Rng& rng) {
  const double loc = spec.param_or("loc", 0.0);
  const double scale = spec.param_or("scale", 1.0);
  switch (spec.kind) {
    case PriorKind::Gaussian:
      return loc + scale * rng.normal();
    case PriorKind::Laplace: {
      const double u = rng.uniform() - 0.5;
      const double s = u > 0.0 ? 1.0 : -1.0;
      return loc - scale * s * std::log1p(-2.0 * std::abs(u));
    }
    case PriorKind::StudentT: {
      const double dof = spec.param("dof");
      const double z = rng.normal();
      return loc + scale * z / std::sqrt(rng.chi_squared(dof) / dof);
    }
    case PriorKind::Cauchy:
      return loc + scale * std::tan(kPi * (rng.uniform() - 0.5));
    default:
      fail(ErrorCode::DomainError, "sample_univariate: not a univariate kind");
  }
}

inline std::size_t sample_component(const PriorSpec& spec, Rng& rng) {
  const std::vector<double> w = mixture_weights(spec);
  const double u = rng.uniform();
  double cum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    cum += w[i];
    if (u <= cum) return i;
  }
  return w.size() - 1;
}

}  // namespace detail

inline std::vector<double> sample_hyper_coords(const PriorSpec& spec, Rng& rng);

// Base conditional of a hierarchical prior with the governed hyperparameters
// substituted from the unconstrained coordinates.
inline PriorSpec resolve_base(const PriorSpec& spec, std::span<const double> hyper) {
  require(spec.kind == PriorKind::Hierarchical, ErrorCode::DomainError,
          "resolve_base: spec is not hierarchical");
  PriorSpec base = spec.components.front();
  std::size_t idx = 0;
  for (const auto& [name, hp] : spec.hyperpriors) {
    const double c = hyper[idx];
    base.params[name] =
        detail::transform_for(name) == HyperTransform::Log ? std::exp(c) : c;
    idx += detail::slot_width(hp);
  }
  return base;
}

// One i.i.d. draw written into `out`; univariate kinds fill elementwise, a
// multivariate kind requires out.size() == p, and a hierarchical kind draws
// one hyperparameter set for the whole span.
inline void sample_into(const PriorSpec& spec, Rng& rng, std::span<double> out) {
  switch (spec.kind) {
    case PriorKind::Gaussian:
    case PriorKind::Laplace:
    case PriorKind::StudentT:
    case PriorKind::Cauchy:
      for (double& v : out) v = detail::sample_univariate(spec, rng);
      return;
    case PriorKind::MultivariateGaussian:
    case PriorKind::MultivariateT: {
      const std::size_t p = spec.mean.size();
      require(out.size() == p, ErrorCode::DimensionMismatch,
              "multivariate draw expects length " + std::to_string(p));
      const auto l = cholesky(spec.cov);
      require(l.has_value(), ErrorCode::NonPSDCovariance, "covariance not PSD");
      std::vector<double> z(p);
      for (double& v : z) v = rng.normal();
      const std::vector<double> lz = lower_triangular_times(*l, z);
      double shrink = 1.0;
      if (spec.kind == PriorKind::MultivariateT) {
        const double dof = spec.param("dof");
        shrink = 1.0 / std::sqrt(rng.chi_squared(dof) / dof);
      }
      for (std::size_t i = 0; i < p; ++i) out[i] = spec.mean[i] + shrink * lz[i];
      return;
    }
    case PriorKind::Mixture: {
      const std::size_t p = spec.dim();
      if (p == 0) {
        for (double& v : out) {
          const std::size_t i = detail::sample_component(spec, rng);
          double x;
          sample_into(spec.components[i], rng, std::span<double>(&x, 1));
          v = x;
        }
      } else {
        const std::size_t i = detail::sample_component(spec, rng);
        sample_into(spec.components[i], rng, out);
      }
      return;
    }
    case PriorKind::Hierarchical: {
      const std::vector<double> coords = sample_hyper_coords(spec, rng);
      sample_into(resolve_base(spec, coords), rng, out);
      return;
    }
  }
}

// Draws natural values for every hyperparameter slot (rejecting non-positive
// values for log-transformed ones) and returns the unconstrained coordinates.
inline std::vector<double> sample_hyper_coords(const PriorSpec& spec, Rng& rng) {
  require(spec.kind == PriorKind::Hierarchical, ErrorCode::DomainError,
          "sample_hyper_coords: spec is not hierarchical");
  std::vector<double> coords;
  for (const auto& [name, hp] : spec.hyperpriors) {
    std::vector<double> nested;
    PriorSpec resolved = hp;
    if (hp.kind == PriorKind::Hierarchical) {
      nested = sample_hyper_coords(hp, rng);
      resolved = resolve_base(hp, nested);
    }
    double v = 0.0;
    if (detail::transform_for(name) == HyperTransform::Log) {
      bool ok = false;
      for (int attempt = 0; attempt < 1000; ++attempt) {
        sample_into(resolved, rng, std::span<double>(&v, 1));
        if (v > 0.0) {
          ok = true;
          break;
        }
      }
      require(ok, ErrorCode::DomainError,
              "hyperprior for '" + name + "' produced no positive draw");
      coords.push_back(std::log(v));
    } else {
      sample_into(resolved, rng, std::span<double>(&v, 1));
      coords.push_back(v);
    }
    coords.insert(coords.end(), nested.begin(), nested.end());
  }
  return coords;
}

// n i.i.d. draws; univariate kinds give a single column.
inline Matrix sample(const PriorSpec& spec, Rng& rng, std::size_t n) {
  const std::size_t p = std::max<std::size_t>(spec.dim(), 1);
  Matrix draws(n, p);
  for (std::size_t i = 0; i < n; ++i) sample_into(spec, rng, draws.row(i));
  return draws;
}

}  // namespace bnnmc
