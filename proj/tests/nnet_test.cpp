#include <doctest.h>

#include "advstego/error.hpp"
#include "advstego/nnet.hpp"
#include "test_support.hpp"

using namespace advstego;

namespace {

AcousticModel tiny_model(std::uint64_t seed) {
  ModelArchitecture arch;
  arch.alphabet = Alphabet("abc");
  arch.context_radius = 1;
  arch.hidden = {7, 5};
  auto m = init_model(arch, seed);
  // Larger weights and a non-trivial normalization exercise every term.
  for (auto& p : m.params) p *= 8.0;
  m.feature_mean = testing::random_matrix(1, 26, seed + 1);
  m.feature_scale = testing::random_matrix(1, 26, seed + 2).array().abs() + 0.3;
  return m;
}

// Scalar probe loss: sum(logits .* R).
double probe(const AcousticModel& m, const FeatureMatrix& f, const Matrix& r) {
  return (forward_logits(m, f).array() * r.array()).sum();
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-3, std::max(std::abs(a), std::abs(b))); }

}  // namespace

TEST_CASE("init_model is seeded, bounded and shaped") {
  const ModelArchitecture arch;
  const auto a = init_model(arch, 3), b = init_model(arch, 3), c = init_model(arch, 4);
  CHECK(a.layer_sizes == std::vector<int>{182, 128, 128, 28});
  CHECK(a.params.size() == 6);
  CHECK(a.weight(0).rows() == 128);
  CHECK(a.weight(0).cols() == 182);
  CHECK(a.bias(2).cols() == 28);
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    CHECK(a.params[i] == b.params[i]);
    CHECK(a.params[i] != c.params[i]);
    CHECK(a.params[i].cwiseAbs().maxCoeff() <= 0.05);
  }
  CHECK(a.feature_mean.isZero());
  CHECK(a.feature_scale.isOnes());
}

TEST_CASE("validate catches inconsistent models") {
  auto m = tiny_model(1);
  m.validate();
  auto bad = m;
  bad.params.pop_back();
  CHECK_THROWS_AS(bad.validate(), ShapeError);
  bad = m;
  bad.weight(1) = Matrix::Zero(3, 3);
  CHECK_THROWS_AS(bad.validate(), ShapeError);
  bad = m;
  bad.layer_sizes.back() = 9;
  CHECK_THROWS_AS(bad.validate(), ShapeError);
  bad = m;
  bad.bias(0)(0, 0) = std::nan("");
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = m;
  bad.feature_scale.resize(3);
  CHECK_THROWS_AS(bad.validate(), ShapeError);
}

TEST_CASE("forward output shape and frame locality") {
  const auto m = tiny_model(2);
  FeatureMatrix f{testing::random_matrix(12, 26, 5), 50.0};
  const Matrix logits = forward_logits(m, f);
  CHECK(logits.rows() == 12);
  CHECK(logits.cols() == 4);

  // With radius 1, changing frame 6 only moves frames 5..7.
  FeatureMatrix g = f;
  g.values.row(6).array() += 1.0;
  const Matrix moved = forward_logits(m, g);
  for (Eigen::Index t = 0; t < 12; ++t) {
    const bool inside = t >= 5 && t <= 7;
    CHECK((moved.row(t) != logits.row(t)) == inside);
  }
  CHECK_THROWS_AS(forward(m, FeatureMatrix{Matrix::Zero(4, 13), 50.0}), ShapeError);
  CHECK_THROWS_AS(forward(m, FeatureMatrix{Matrix::Zero(0, 26), 50.0}), ShapeError);
}

TEST_CASE("parameter and input gradients match central differences") {
  const auto m = tiny_model(3);
  const FeatureMatrix f{testing::random_matrix(6, 26, 7), 50.0};
  const Matrix r = testing::random_matrix(6, 4, 8);
  auto fwd = forward(m, f);
  const auto g = backward(m, fwd.tape, r);
  const double h = 1e-6;

  double worst = 0.0;
  for (std::size_t p = 0; p < m.params.size(); ++p) {
    for (Eigen::Index i = 0; i < m.params[p].size(); ++i) {
      auto mp = m, mm = m;
      mp.params[p].data()[i] += h;
      mm.params[p].data()[i] -= h;
      const double fd = (probe(mp, f, r) - probe(mm, f, r)) / (2 * h);
      worst = std::max(worst, rel_err(fd, g.param_grads[p].data()[i]));
    }
  }
  CHECK(worst <= 1e-5);

  worst = 0.0;
  for (Eigen::Index i = 0; i < f.values.size(); ++i) {
    auto fp = f, fm = f;
    fp.values.data()[i] += h;
    fm.values.data()[i] -= h;
    const double fd = (probe(m, fp, r) - probe(m, fm, r)) / (2 * h);
    worst = std::max(worst, rel_err(fd, g.grad_features.data()[i]));
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("an activation tape is single use and bound to its model") {
  const auto m = tiny_model(4), other = tiny_model(5);
  const FeatureMatrix f{testing::random_matrix(5, 26, 1), 50.0};
  auto fwd = forward(m, f);
  CHECK_THROWS_AS(backward(other, fwd.tape, Matrix::Zero(5, 4)), InvalidArgument);
  CHECK_THROWS_AS(backward(m, fwd.tape, Matrix::Zero(4, 4)), ShapeError);
  backward(m, fwd.tape, Matrix::Zero(5, 4));
  CHECK_THROWS_AS(backward(m, fwd.tape, Matrix::Zero(5, 4)), InvalidArgument);
}

TEST_CASE("Adam update matches the reference recurrence") {
  std::vector<Matrix> params{testing::random_matrix(2, 3, 1)};
  const std::vector<Matrix> start = params;
  auto state = make_adam(params, 0.01);
  const std::vector<Matrix> g1{testing::random_matrix(2, 3, 2)}, g2{testing::random_matrix(2, 3, 3)};
  adam_step(state, params, g1);
  adam_step(state, params, g2);
  CHECK(state.step == 2);
  for (Eigen::Index i = 0; i < 6; ++i) {
    double p = start[0].data()[i], m = 0, v = 0;
    int t = 0;
    for (double g : {g1[0].data()[i], g2[0].data()[i]}) {
      ++t;
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
      p -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    }
    CHECK(params[0].data()[i] == doctest::Approx(p).epsilon(1e-14));
  }
}

TEST_CASE("first Adam step moves each parameter by at most the learning rate") {
  std::vector<Matrix> params{Matrix::Zero(1, 4)};
  auto state = make_adam(params, 100.0);
  adam_step(state, params, std::vector<Matrix>{(Matrix(1, 4) << 1e-3, -5.0, 1e6, 0.0).finished()});
  CHECK(params[0].cwiseAbs().maxCoeff() <= 100.0);
  CHECK(params[0](0, 1) > 0.0);
  CHECK(params[0](0, 3) == 0.0);
}

TEST_CASE("Adam rejects bad gradients without mutating anything") {
  std::vector<Matrix> params{Matrix::Ones(2, 2), Matrix::Ones(1, 3)};
  auto state = make_adam(params, 0.1);
  std::vector<Matrix> grads{Matrix::Ones(2, 2), Matrix::Ones(1, 3)};
  grads[1](0, 2) = INFINITY;
  CHECK_THROWS_AS(adam_step(state, params, grads), NonFiniteGradient);
  CHECK(params[0].isOnes());
  CHECK(state.step == 0);
  CHECK(state.first_moment[0].isZero());
  grads[1] = Matrix::Ones(2, 2);
  CHECK_THROWS_AS(adam_step(state, params, grads), ShapeError);
  CHECK_THROWS_AS(adam_step(state, params, std::vector<Matrix>{Matrix::Ones(2, 2)}), ShapeError);
  CHECK_THROWS_AS(make_adam(params, 0.0), InvalidArgument);
}
