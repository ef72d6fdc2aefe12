#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "bnnmc/data.hpp"
#include "bnnmc/errors.hpp"
#include "bnnmc/model.hpp"
#include "bnnmc/prior.hpp"
#include "bnnmc/sampler.hpp"

namespace bnnmc {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// PriorSpec <-> {"kind", "params", "components", "weights", "hyperpriors"}
// Multivariate location/covariance travel inside "params" as arrays; a
// hierarchical spec carries its base distribution as components[0].
// ---------------------------------------------------------------------------

inline json to_json(const PriorSpec& spec) {
  json j;
  j["kind"] = prior_kind_name(spec.kind);
  json params = json::object();
  for (const auto& [k, v] : spec.params) params[k] = v;
  if (!spec.mean.empty()) {
    params["mean"] = spec.mean;
    json cov = json::array();
    for (std::size_t i = 0; i < spec.cov.rows; ++i) {
      cov.push_back(std::vector<double>(spec.cov.row(i).begin(), spec.cov.row(i).end()));
    }
    params["cov"] = cov;
  }
  j["params"] = params;
  if (!spec.components.empty()) {
    json comps = json::array();
    for (const PriorSpec& c : spec.components) comps.push_back(to_json(c));
    j["components"] = comps;
  }
  if (!spec.weights.empty()) j["weights"] = spec.weights;
  if (!spec.hyperpriors.empty()) {
    json hp = json::object();
    for (const auto& [name, sub] : spec.hyperpriors) hp[name] = to_json(sub);
    j["hyperpriors"] = hp;
  }
  return j;
}

inline PriorSpec prior_from_json(const json& j) {
  require(j.is_object() && j.contains("kind"), ErrorCode::ParseError,
          "prior JSON needs a \"kind\" field");
  PriorSpec spec;
  const std::string kind = j.at("kind").get<std::string>();
  bool known = false;
  for (PriorKind k : {PriorKind::Gaussian, PriorKind::Laplace, PriorKind::StudentT,
                      PriorKind::Cauchy, PriorKind::MultivariateGaussian,
                      PriorKind::MultivariateT, PriorKind::Hierarchical,
                      PriorKind::Mixture}) {
    if (kind == prior_kind_name(k)) {
      spec.kind = k;
      known = true;
      break;
    }
  }
  require(known, ErrorCode::ParseError, "unknown prior kind '" + kind + "'");

  if (j.contains("params")) {
    for (const auto& [key, value] : j.at("params").items()) {
      if (key == "mean") {
        spec.mean = value.get<std::vector<double>>();
      } else if (key == "cov") {
        const auto rows = value.get<std::vector<std::vector<double>>>();
        spec.cov = Matrix(rows.size(), rows.empty() ? 0 : rows.front().size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
          require(rows[i].size() == spec.cov.cols, ErrorCode::ParseError,
                  "ragged covariance rows");
          std::copy(rows[i].begin(), rows[i].end(), spec.cov.row(i).begin());
        }
      } else {
        require(value.is_number(), ErrorCode::ParseError,
                "prior parameter '" + key + "' must be a number");
        spec.params[key] = value.get<double>();
      }
    }
  }
  if (j.contains("components")) {
    for (const json& c : j.at("components")) {
      spec.components.push_back(prior_from_json(c));
    }
  }
  if (j.contains("weights")) spec.weights = j.at("weights").get<std::vector<double>>();
  if (j.contains("hyperpriors")) {
    for (const auto& [name, sub] : j.at("hyperpriors").items()) {
      spec.hyperpriors[name] = prior_from_json(sub);
    }
  }
  return spec;
}

// ---------------------------------------------------------------------------
// ModelSpec <-> {"arch", "widths", "activation", "likelihood"[, "noise_sigma"]}
// ---------------------------------------------------------------------------

inline json to_json(const ModelSpec& spec) {
  json j;
  j["arch"] = spec.arch == Architecture::Linear ? "linear" : "mlp";
  j["widths"] = spec.widths;
  j["activation"] = spec.activation == Activation::Tanh ? "tanh" : "relu";
  if (spec.likelihood == Likelihood::Categorical) {
    j["likelihood"] = "categorical";
  } else {
    j["likelihood"] = "gaussian";
    j["noise_sigma"] = spec.noise_sigma;
  }
  return j;
}

inline ModelSpec model_from_json(const json& j) {
  ModelSpec spec;
  const std::string arch = j.value("arch", "mlp");
  if (arch == "linear") {
    spec.arch = Architecture::Linear;
  } else if (arch == "mlp") {
    spec.arch = Architecture::Mlp;
  } else {
    fail(ErrorCode::ParseError, "unknown architecture '" + arch + "'");
  }
  require(j.contains("widths"), ErrorCode::ParseError, "model JSON needs \"widths\"");
  spec.widths = j.at("widths").get<std::vector<std::size_t>>();
  const std::string act = j.value("activation", "tanh");
  if (act == "tanh") {
    spec.activation = Activation::Tanh;
  } else if (act == "relu") {
    spec.activation = Activation::Relu;
  } else {
    fail(ErrorCode::ParseError, "unknown activation '" + act + "'");
  }
  const std::string lik = j.value("likelihood", "categorical");
  if (lik == "categorical") {
    spec.likelihood = Likelihood::Categorical;
  } else if (lik == "gaussian") {
    spec.likelihood = Likelihood::GaussianRegression;
    spec.noise_sigma = j.value("noise_sigma", 1.0);
  } else {
    fail(ErrorCode::ParseError, "unknown likelihood '" + lik + "'");
  }
  return spec;
}

// ---------------------------------------------------------------------------
// SamplerConfig <-> {"kind","step_size","temperature","friction",
//   "leapfrog_steps","cycles","steps","burn_in","thin","precond","seed"}
// plus the "batch_size" extension (0 = full batch).
// ---------------------------------------------------------------------------

inline json to_json(const SamplerConfig& cfg) {
  json j;
  j["kind"] = sampler_kind_name(cfg.kind);
  j["step_size"] = cfg.step_size;
  j["temperature"] = cfg.temperature;
  j["friction"] = cfg.friction;
  j["leapfrog_steps"] = cfg.leapfrog_steps;
  j["cycles"] = cfg.cycles;
  j["steps"] = cfg.steps;
  j["burn_in"] = cfg.burn_in;
  j["thin"] = cfg.thin;
  if (cfg.precond.enabled) {
    j["precond"] = {{"beta", cfg.precond.beta}, {"damping", cfg.precond.damping}};
  } else {
    j["precond"] = nullptr;
  }
  j["seed"] = cfg.seed;
  j["batch_size"] = cfg.batch_size;
  return j;
}

inline SamplerConfig sampler_from_json(const json& j) {
  SamplerConfig cfg;
  const std::string kind = j.value("kind", "ggmc");
  if (kind == "sgld") {
    cfg.kind = SamplerKind::Sgld;
  } else if (kind == "ggmc") {
    cfg.kind = SamplerKind::Ggmc;
  } else if (kind == "hmc") {
    cfg.kind = SamplerKind::Hmc;
  } else {
    fail(ErrorCode::ParseError, "unknown sampler kind '" + kind + "'");
  }
  cfg.step_size = j.value("step_size", cfg.step_size);
  cfg.temperature = j.value("temperature", cfg.temperature);
  cfg.friction = j.value("friction", cfg.friction);
  cfg.leapfrog_steps = j.value("leapfrog_steps", cfg.leapfrog_steps);
  cfg.cycles = j.value("cycles", cfg.cycles);
  cfg.steps = j.value("steps", cfg.steps);
  cfg.burn_in = j.value("burn_in", cfg.burn_in);
  cfg.thin = j.value("thin", cfg.thin);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  if (j.contains("precond") && !j.at("precond").is_null()) {
    cfg.precond.enabled = true;
    cfg.precond.beta = j.at("precond").value("beta", cfg.precond.beta);
    cfg.precond.damping = j.at("precond").value("damping", cfg.precond.damping);
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// DataConfig
// ---------------------------------------------------------------------------

inline json to_json(const DataConfig& cfg) {
  json j;
  switch (cfg.kind) {
    case DataConfig::Kind::Blobs:
      j["kind"] = "blobs";
      j["per_class"] = cfg.per_class;
      j["classes"] = cfg.classes;
      j["dim"] = cfg.dim;
      j["separation"] = cfg.separation;
      break;
    case DataConfig::Kind::Sine:
      j["kind"] = "sine";
      j["n"] = cfg.n;
      j["noise"] = cfg.noise;
      break;
    case DataConfig::Kind::Csv:
      j["kind"] = "csv";
      j["path"] = cfg.path;
      j["target_column"] = cfg.target_column;
      j["task"] = cfg.task == TaskKind::Classification ? "classification" : "regression";
      break;
  }
  j["seed"] = cfg.seed;
  return j;
}

inline DataConfig data_from_json(const json& j) {
  DataConfig cfg;
  const std::string kind = j.value("kind", "blobs");
  if (kind == "blobs") {
    cfg.kind = DataConfig::Kind::Blobs;
    cfg.per_class = j.value("per_class", cfg.per_class);
    cfg.classes = j.value("classes", cfg.classes);
    cfg.dim = j.value("dim", cfg.dim);
    cfg.separation = j.value("separation", cfg.separation);
  } else if (kind == "sine") {
    cfg.kind = DataConfig::Kind::Sine;
    cfg.n = j.value("n", cfg.n);
    cfg.noise = j.value("noise", cfg.noise);
    cfg.task = TaskKind::Regression;
  } else if (kind == "csv") {
    cfg.kind = DataConfig::Kind::Csv;
    cfg.path = j.value("path", std::string{});
    cfg.target_column = j.value("target_column", cfg.target_column);
    cfg.task = j.value("task", std::string{"classification"}) == "regression"
                   ? TaskKind::Regression
                   : TaskKind::Classification;
  } else {
    fail(ErrorCode::ParseError, "unknown data kind '" + kind + "'");
  }
  cfg.seed = j.value("seed", cfg.seed);
  return cfg;
}

}  // namespace bnnmc
