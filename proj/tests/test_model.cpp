#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "bnnmc/data.hpp"
#include "bnnmc/model.hpp"
#include "testutil.hpp"

using namespace bnnmc;

namespace {

ModelSpec mlp_classifier(std::vector<std::size_t> widths,
                         Activation act = Activation::Tanh) {
  ModelSpec spec;
  spec.arch = Architecture::Mlp;
  spec.widths = std::move(widths);
  spec.activation = act;
  spec.likelihood = Likelihood::Categorical;
  return spec;
}

ModelSpec regressor(std::vector<std::size_t> widths, double sigma = 1.0) {
  ModelSpec spec;
  spec.arch = widths.size() == 2 ? Architecture::Linear : Architecture::Mlp;
  spec.widths = std::move(widths);
  spec.likelihood = Likelihood::GaussianRegression;
  spec.noise_sigma = sigma;
  return spec;
}

Batch batch_from(const Matrix& x, std::vector<int> targets) {
  Batch b;
  b.inputs = x;
  b.class_targets = std::move(targets);
  return b;
}

Batch batch_from(const Matrix& x, const Matrix& y) {
  Batch b;
  b.inputs = x;
  b.real_targets = y;
  return b;
}

}  // namespace

TEST_CASE("init_params counts parameters and appends hyper groups") {
  Rng rng(1);
  const ModelSpec spec = mlp_classifier({2, 4, 2});
  const ParamStore store = init_params(spec, PriorSpec::gaussian(0.0, 1.0), rng);
  CHECK(store.dim() == 22);  // 2*4 + 4 + 4*2 + 2
  CHECK(store.groups.size() == 4);
  CHECK(store.groups[0].name == "layer0.weight");
  CHECK(store.groups[0].shape == std::vector<std::size_t>{4, 2});
  CHECK(store.groups[3].name == "layer1.bias");

  Rng rng2(1);
  const PriorSpec hier = PriorSpec::hierarchical(
      PriorSpec::gaussian(0.0, 1.0), {{"scale", PriorSpec::gaussian(1.0, 0.25)}});
  const ParamStore hstore = init_params(spec, hier, rng2);
  CHECK(hstore.dim() == 26);  // one scale coordinate per weight group
  CHECK(hstore.groups.size() == 8);
  CHECK(hstore.groups[4].name == "layer0.weight.scale");
  CHECK(hstore.groups[4].is_hyperparameter);
  CHECK(hstore.groups[4].transform == HyperTransform::Log);
  CHECK(hstore.groups[0].hyper_groups == std::vector<std::size_t>{4});
}

TEST_CASE("init_params is deterministic in the seed") {
  const ModelSpec spec = mlp_classifier({3, 5, 2});
  Rng a(77);
  Rng b(77);
  const ParamStore sa = init_params(spec, PriorSpec::laplace(0.0, 1.0), a);
  const ParamStore sb = init_params(spec, PriorSpec::laplace(0.0, 1.0), b);
  CHECK(sa.flatten() == sb.flatten());
}

TEST_CASE("forward matches hand-computed affine maps") {
  ModelSpec linear;
  linear.arch = Architecture::Linear;
  linear.widths = {2, 2};
  Rng rng(1);
  ParamStore store = init_params(linear, PriorSpec::gaussian(0.0, 1.0), rng);

  // Zero weights, zero bias -> zero outputs.
  std::vector<double> theta(store.dim(), 0.0);
  Matrix x(3, 2);
  x(0, 0) = 1.0;
  x(1, 1) = -2.0;
  x(2, 0) = 0.5;
  const Matrix zero_out = forward(linear, theta, x);
  for (double v : zero_out.data) CHECK(v == 0.0);

  // Identity weight, zero bias: y = x.
  theta = {1.0, 0.0, 0.0, 1.0, 0.0, 0.0};  // W row-major, then b
  Matrix probe(1, 2);
  probe(0, 0) = 1.0;
  probe(0, 1) = 2.0;
  const Matrix id_out = forward(linear, theta, probe);
  CHECK(id_out(0, 0) == doctest::Approx(1.0));
  CHECK(id_out(0, 1) == doctest::Approx(2.0));
}

TEST_CASE("zeroing the final layer leaves only its bias") {
  const ModelSpec spec = mlp_classifier({2, 4, 2});
  Rng rng(9);
  ParamStore store = init_params(spec, PriorSpec::gaussian(0.0, 1.0), rng);
  std::vector<double> theta = store.flatten();
  // layer1.weight occupies [12, 20), layer1.bias [20, 22).
  for (std::size_t i = 12; i < 20; ++i) theta[i] = 0.0;
  theta[20] = 0.7;
  theta[21] = -0.3;
  Matrix x(4, 2);
  for (double& v : x.data) v = 2.0;
  const Matrix out = forward(spec, theta, x);
  for (std::size_t i = 0; i < out.rows; ++i) {
    CHECK(out(i, 0) == doctest::Approx(0.7));
    CHECK(out(i, 1) == doctest::Approx(-0.3));
  }
}

TEST_CASE("full-batch potential equals the unscaled sum") {
  const ModelSpec spec = mlp_classifier({2, 3, 2});
  Rng rng(5);
  const ParamStore store = init_params(spec, PriorSpec::gaussian(0.0, 1.0), rng);
  Matrix x(6, 2);
  std::vector<int> y(6);
  for (std::size_t i = 0; i < 6; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = rng.normal();
    y[i] = static_cast<int>(i % 2);
  }
  const Batch full = batch_from(x, y);
  const PotentialResult r = potential(spec, store, full, 6);

  // Accumulate per-point log likelihoods with N/|B| = 6 on single-row batches.
  double loglik = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    Matrix xi(1, 2);
    xi(0, 0) = x(i, 0);
    xi(0, 1) = x(i, 1);
    const PotentialResult ri = potential(spec, store, batch_from(xi, std::vector<int>{y[i]}), 6);
    loglik += ri.log_lik / 6.0;
  }
  CHECK(r.log_lik == doctest::Approx(loglik).epsilon(1e-10));
  CHECK(r.potential == doctest::Approx(-r.log_lik - r.log_prior).epsilon(1e-12));
}

TEST_CASE("regression log likelihood at an exact fit is the normalizer") {
  ModelSpec spec = regressor({2, 1}, 1.0);
  Rng rng(2);
  ParamStore store = init_params(spec, PriorSpec::gaussian(0.0, 1.0), rng);
  std::vector<double> theta(store.dim(), 0.0);
  store.set_flat(theta);

  Matrix x(1, 2);
  x(0, 0) = 0.3;
  x(0, 1) = -0.4;
  Matrix y(1, 1);
  y(0, 0) = 0.0;  // prediction with zero weights is exactly the target
  const PotentialResult r = potential(spec, store, batch_from(x, y), 1);
  CHECK(r.log_lik == doctest::Approx(-0.5 * std::log(2.0 * 3.14159265358979323846))
                         .epsilon(1e-12));
}

TEST_CASE("minibatch log likelihood is unbiased: exact subset enumeration") {
  const ModelSpec spec = mlp_classifier({2, 3, 2});
  Rng rng(13);
  const ParamStore store = init_params(spec, PriorSpec::gaussian(0.0, 1.0), rng);
  Matrix x(6, 2);
  std::vector<int> y(6);
  for (std::size_t i = 0; i < 6; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = rng.normal();
    y[i] = static_cast<int>(rng.index(2));
  }
  const double full = potential(spec, store, batch_from(x, y), 6).log_lik;

  // Average the scaled estimate over all size-2 subsets of the 6 points.
  double avg = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = i + 1; j < 6; ++j) {
      Matrix xb(2, 2);
      xb(0, 0) = x(i, 0);
      xb(0, 1) = x(i, 1);
      xb(1, 0) = x(j, 0);
      xb(1, 1) = x(j, 1);
      avg += potential(spec, store, batch_from(xb, std::vector<int>{y[i], y[j]}), 6).log_lik;
      ++count;
    }
  }
  avg /= count;
  CHECK(avg == doctest::Approx(full).epsilon(1e-10));
}

TEST_CASE("potential gradients match finite differences across architectures") {
  Rng rng(37);
  struct Case {
    ModelSpec model;
    PriorSpec prior;
  };
  std::vector<Case> cases;
  cases.push_back({mlp_classifier({2, 4, 3}), PriorSpec::gaussian(0.0, 1.0)});
  cases.push_back({mlp_classifier({2, 4, 2}, Activation::Relu),
                   PriorSpec::student_t(3.0, 0.0, 1.0)});
  cases.push_back({regressor({3, 1}), PriorSpec::laplace(0.0, 0.8)});
  cases.push_back({regressor({2, 5, 2}, 0.5), PriorSpec::cauchy(0.0, 1.0)});
  cases.push_back(
      {mlp_classifier({2, 3, 2}),
       PriorSpec::hierarchical(PriorSpec::gaussian(0.0, 1.0),
                               {{"scale", PriorSpec::gaussian(1.0, 0.25)}})});

  for (const Case& c : cases) {
    ParamStore store = init_params(c.model, c.prior, rng);
    const std::size_t n = 5;
    Matrix x(n, c.model.widths.front());
    for (double& v : x.data) v = rng.normal();
    Batch b;
    b.inputs = x;
    if (c.model.likelihood == Likelihood::Categorical) {
      for (std::size_t i = 0; i < n; ++i) {
        b.class_targets.push_back(
            static_cast<int>(rng.index(c.model.widths.back())));
      }
    } else {
      b.real_targets = Matrix(n, c.model.widths.back());
      for (double& v : b.real_targets.data) v = rng.normal();
    }

    std::vector<double> theta = store.flatten();
    if (c.prior.kind == PriorKind::Laplace) {
      for (double& v : theta) {
        if (std::abs(v) < 1e-2) v += 0.05;  // stay off the prior kink
      }
    }
    const PotentialResult r = potential(c.model, store, theta, b, n);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double fd = testutil::finite_difference(
          [&](std::span<const double> t) {
            return potential(c.model, store, t, b, n).potential;
          },
          theta, i);
      CHECK(testutil::rel_err(r.grad[i], fd) < 1e-5);
    }
  }
}

TEST_CASE("non-finite gradients raise instead of propagating") {
  const ModelSpec spec = mlp_classifier({2, 2, 2});
  Rng rng(3);
  const ParamStore store = init_params(spec, PriorSpec::gaussian(0.0, 1.0), rng);
  std::vector<double> theta = store.flatten();
  theta[0] = std::nan("");
  Matrix x(1, 2);
  Batch b = batch_from(x, std::vector<int>{0});
  CHECK_THROWS_AS(potential(spec, store, theta, b, 1), Error);
}

TEST_CASE("predictive average over samples behaves like a mixture") {
  const ModelSpec spec = mlp_classifier({2, 3, 2});
  Rng rng(4);
  const ParamStore store = init_params(spec, PriorSpec::gaussian(0.0, 1.0), rng);
  const std::vector<double> theta = store.flatten();
  Matrix x(3, 2);
  for (double& v : x.data) v = rng.normal();

  // One sample: the average is that sample's softmax forward pass.
  Matrix one(1, theta.size());
  std::copy(theta.begin(), theta.end(), one.row(0).begin());
  const PredictiveResult single = log_predictive(spec, store, one, x);
  const Matrix logits = forward(spec, theta, x);
  for (std::size_t i = 0; i < 3; ++i) {
    double mx = std::max(logits(i, 0), logits(i, 1));
    const double z0 = std::exp(logits(i, 0) - mx);
    const double z1 = std::exp(logits(i, 1) - mx);
    CHECK(single.probs(i, 0) == doctest::Approx(z0 / (z0 + z1)).epsilon(1e-12));
  }

  // Two identical samples: unchanged.
  Matrix two(2, theta.size());
  std::copy(theta.begin(), theta.end(), two.row(0).begin());
  std::copy(theta.begin(), theta.end(), two.row(1).begin());
  const PredictiveResult dup = log_predictive(spec, store, two, x);
  for (std::size_t i = 0; i < dup.probs.data.size(); ++i) {
    CHECK(dup.probs.data[i] == doctest::Approx(single.probs.data[i]).epsilon(1e-14));
  }

  // Rows always sum to one.
  for (std::size_t i = 0; i < 3; ++i) {
    double sum = 0.0;
    for (double v : dup.probs.row(i)) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }

  // Empty archive is an error.
  Matrix empty(0, theta.size());
  CHECK_THROWS_AS(log_predictive(spec, store, empty, x), Error);
}

TEST_CASE("opposed one-hot samples average to the symmetric prediction") {
  // A linear map with huge biases pins the softmax to each class in turn.
  ModelSpec spec;
  spec.arch = Architecture::Linear;
  spec.widths = {1, 2};
  spec.likelihood = Likelihood::Categorical;
  Rng rng(6);
  const ParamStore store = init_params(spec, PriorSpec::gaussian(0.0, 1.0), rng);

  Matrix samples(2, store.dim());
  // theta = [w0, w1, b0, b1]
  samples(0, 2) = 50.0;   // all mass on class 0
  samples(1, 3) = 50.0;   // all mass on class 1
  Matrix x(1, 1);
  const PredictiveResult pred = log_predictive(spec, store, samples, x);
  CHECK(pred.probs(0, 0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(pred.probs(0, 1) == doctest::Approx(0.5).epsilon(1e-9));
}
