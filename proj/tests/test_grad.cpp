#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "gradcheck_fixtures.hpp"
#include "helpers.hpp"
#include "qnn/grad.hpp"

using namespace qnn;
using qnn::testing::max_abs_diff;
using qnn::testing::random_tensor;

namespace {

SeqMat random_sequence(Rng& rng, std::size_t steps, Index width, Index batch,
                       double scale = 1.0) {
  SeqMat seq;
  for (std::size_t t = 0; t < steps; ++t) {
    Mat m(width, batch);
    for (Index j = 0; j < batch; ++j)
      for (Index i = 0; i < width; ++i) m(i, j) = rng.uniform(-scale, scale);
    seq.push_back(std::move(m));
  }
  return seq;
}

Batch mse_batch(Rng& rng, std::size_t steps, Index width, Index out_width, Index batch) {
  Batch b;
  b.inputs = random_sequence(rng, steps, width, batch);
  b.loss = LossKind::mse;
  b.target.dense = random_sequence(rng, steps, out_width, batch);
  return b;
}

Batch nll_batch(Rng& rng, std::size_t steps, Index width, Index out_width, Index batch) {
  Batch b;
  b.inputs = random_sequence(rng, steps, width, batch);
  b.loss = LossKind::nll;
  for (std::size_t t = 0; t < steps; ++t) {
    Eigen::VectorXi cls(batch);
    for (Index j = 0; j < batch; ++j)
      cls(j) = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(out_width)));
    b.target.classes.push_back(cls);
  }
  return b;
}

}  // namespace

TEST_CASE("fd oracle recovers the derivative of a quadratic toy loss") {
  // One real weight w with identity activation, input 1, target 0:
  // L(w) = w^2, so dL/dw = 2w = 6 at w = 3.
  ModelSpec spec;
  spec.input_width = 1;
  LayerSpecEntry e{LayerKind::dense, 1, Activation::identity};
  e.bias = false;
  spec.layers = {e};
  Model m = build_model(spec, 0);
  std::get<DenseLayer<RealAlgebra>>(m.layers[0]).weight.planes[0](0, 0) = 3.0;

  Batch b;
  b.inputs = {Mat::Ones(1, 1)};
  b.target.dense = {Mat::Zero(1, 1)};
  b.loss = LossKind::mse;

  const GradientSet g = fd_oracle(m, b, 1e-6);
  REQUIRE(g.tensors.size() == 1);
  REQUIRE(std::fabs(g.tensors[0].planes[0](0, 0) - 6.0) < 1e-8);
}

TEST_CASE("fd oracle is eps-independent on losses without higher curvature") {
  ModelSpec spec;
  spec.input_width = 4;
  LayerSpecEntry e{LayerKind::qdense, 2, Activation::identity};
  spec.layers = {e};
  Model m = build_model(spec, 3);
  Rng rng(4);
  Batch b = mse_batch(rng, 1, 4, 8, 2);

  const GradientSet g1 = fd_oracle(m, b, 1e-4);
  const GradientSet g2 = fd_oracle(m, b, 1e-6);
  for (std::size_t k = 0; k < g1.tensors.size(); ++k)
    for (int c = 0; c < g1.tensors[k].components; ++c)
      REQUIRE((g1.tensors[k].planes[c] - g2.tensors[k].planes[c]).cwiseAbs().maxCoeff() < 1e-7);

  REQUIRE_THROWS_AS(fd_oracle(m, b, 1e-2), ConfigError);
  REQUIRE_THROWS_AS(fd_oracle(m, b, 1e-9), ConfigError);
}

TEST_CASE("zero-weight network with zero targets has zero gradients") {
  ModelSpec spec;
  spec.input_width = 4;
  spec.layers = {{LayerKind::qrnn, 2, Activation::tanh, Activation::identity}};
  Model m = build_model(spec, 5);
  auto& l = std::get<RnnLayer<QuaternionAlgebra>>(m.layers[0]);
  l.w_hx.set_zero();
  l.w_hh.set_zero();
  l.w_hy.set_zero();
  l.b_h.set_zero();

  Rng rng(6);
  Batch b;
  b.inputs = random_sequence(rng, 4, 4, 3);
  b.target.dense.assign(4, Mat::Zero(8, 3));
  b.loss = LossKind::mse;

  const GradientSet g = qbptt(m, b);
  REQUIRE(g.max_abs() == 0.0);
}

TEST_CASE("single-step output gradient has the conjugate form (p - y) x h*") {
  // One quaternion unit, identity activations, T = 1, batch 1. With
  // L = mean of the 4 squared component errors, the seed is (p - y)/2 and
  // the analytic gradient must equal 0.5 (p - y) (x) h*.
  ModelSpec spec;
  spec.input_width = 4;
  spec.layers = {{LayerKind::qrnn, 1, Activation::identity, Activation::identity}};
  Model m = build_model(spec, 777);
  auto& l = std::get<RnnLayer<QuaternionAlgebra>>(m.layers[0]);

  Rng rng(8);
  Batch b;
  b.inputs = random_sequence(rng, 1, 4, 1);
  b.target.dense = random_sequence(rng, 1, 4, 1);
  b.loss = LossKind::mse;

  Model::ForwardCache cache;
  const SeqMat out = m.forward(b.inputs, &cache);
  const GradientSet g = qbptt(m, cache, b.target, b.loss);

  const QTensor h = cache.layer_caches[0].index() == 0
                        ? QTensor{}
                        : std::get<typename RnnLayer<QuaternionAlgebra>::Cache>(
                              cache.layer_caches[0])
                              .h[0];
  const Quaternion p = get_quaternion(from_real<QuaternionAlgebra>(out[0]), 0, 0);
  const Quaternion y = get_quaternion(from_real<QuaternionAlgebra>(b.target.dense[0]), 0, 0);
  const Quaternion expected =
      qnn::testing::hamilton_via_matrix(p - y, conjugate(get_quaternion(h, 0, 0))) * 0.5;

  // W_hy is the third parameter tensor of the layer (W_hx, W_hh, W_hy, b_h).
  const GradTensor& dw_hy = g.tensors[2];
  REQUIRE(dw_hy.name == "layer0.W_hy");
  const Quaternion got(dw_hy.planes[0](0, 0), dw_hy.planes[1](0, 0), dw_hy.planes[2](0, 0),
                       dw_hy.planes[3](0, 0));
  REQUIRE(norm(got - expected) < 1e-12);
}

TEST_CASE("qbptt agrees with the fd oracle across architectures and losses") {
  struct Case {
    LayerKind kind;
    int units;
    std::size_t steps;
  };
  const Case cases[] = {
      {LayerKind::qdense, 3, 1}, {LayerKind::qdense, 2, 3}, {LayerKind::qrnn, 2, 1},
      {LayerKind::qrnn, 3, 3},   {LayerKind::qlstm, 2, 1},  {LayerKind::qlstm, 2, 3},
      {LayerKind::dense, 5, 2},  {LayerKind::rnn, 4, 3},    {LayerKind::lstm, 3, 3},
  };
  for (const Case& c : cases) {
    CAPTURE(to_string(c.kind), c.units, c.steps);

    SECTION("mse " + std::string(to_string(c.kind)) + " T=" + std::to_string(c.steps)) {
      Model m = qnn::testing::make_gradcheck_model(c.kind, c.units, 1000 + c.units);
      Rng rng(99 + c.units + c.steps);
      Batch b = qnn::testing::near_mse_batch(m, c.steps, 2, rng);
      const GradCheckReport rep = grad_check(m, b, 1e-5);
      CAPTURE(rep.max_rel_error);
      REQUIRE(rep.pass);
    }

    SECTION("nll " + std::string(to_string(c.kind)) + " T=" + std::to_string(c.steps)) {
      const double threshold = c.kind == LayerKind::qdense || c.kind == LayerKind::dense
                                   ? 2e-3
                                   : 1.5e-4;
      auto point = qnn::testing::find_conditioned_nll_point(c.kind, c.units, c.steps,
                                                            threshold, 1, 30000);
      CAPTURE(point.seed, point.min_coord);
      const GradCheckReport rep = grad_check(point.model, point.batch, 1e-5);
      CAPTURE(rep.max_rel_error);
      REQUIRE(rep.pass);
    }
  }
}

TEST_CASE("qbptt handles bidirectional qlstm and stacked models") {
  ModelSpec spec;
  spec.input_width = 8;
  LayerSpecEntry e{LayerKind::qlstm, 2};
  e.bidirectional = true;
  spec.layers = {e, {LayerKind::qdense, 2, Activation::tanh}, {LayerKind::dense, 3, Activation::identity}};
  Model m = build_model(spec, 2024);

  Rng rng(123);
  Batch b = qnn::testing::near_mse_batch(m, 4, 2, rng);
  const GradCheckReport rep = grad_check(m, b, 1e-5);
  CAPTURE(rep.max_rel_error);
  REQUIRE(rep.pass);
}

TEST_CASE("a sign-flipped plane is caught and localized") {
  Rng rng(7);
  ModelSpec spec;
  spec.input_width = 8;
  spec.layers = {{LayerKind::qrnn, 2, Activation::tanh, Activation::tanh}};
  Model m = build_model(spec, 31);
  Batch b = mse_batch(rng, 3, 8, 8, 2);

  GradientSet analytic = qbptt(m, b);
  const GradientSet numeric = fd_oracle(m, b);

  // Corrupt the j plane of W_hh.
  analytic.tensors[1].planes[2] *= -1.0;
  const GradCheckReport rep = compare_gradients(analytic, numeric, 1e-5);
  REQUIRE_FALSE(rep.pass);

  double worst = 0.0;
  std::size_t worst_idx = 0;
  for (std::size_t k = 0; k < rep.params.size(); ++k)
    if (rep.params[k].max_rel_error > worst) {
      worst = rep.params[k].max_rel_error;
      worst_idx = k;
    }
  REQUIRE(rep.params[worst_idx].name == "layer0.W_hh");
  REQUIRE(rep.params[worst_idx].worst_component == 2);
}

TEST_CASE("relu models pass at kink-free points and report proximity") {
  Rng rng(17);
  ModelSpec spec;
  spec.input_width = 8;
  spec.layers = {{LayerKind::qdense, 3, Activation::relu}};
  Model m = build_model(spec, 55);
  Batch b = mse_batch(rng, 2, 8, 12, 2);

  // Resample away from kinks, as the harness contract prescribes.
  for (int attempt = 0; attempt < 20; ++attempt) {
    Model::ForwardCache cache;
    m.forward(b.inputs, &cache);
    if (min_abs_relu_preact(m, cache) > 1e-3) break;
    b = mse_batch(rng, 2, 8, 12, 2);
  }

  const GradCheckReport rep = grad_check(m, b, 1e-5);
  REQUIRE(rep.relu_present);
  REQUIRE(std::isfinite(rep.relu_kink_proximity));
  REQUIRE(rep.relu_kink_proximity > 1e-3);
  REQUIRE(rep.pass);

  // A tanh model reports no relu hazard.
  ModelSpec spec2;
  spec2.input_width = 8;
  spec2.layers = {{LayerKind::qdense, 3, Activation::tanh}};
  Model m2 = build_model(spec2, 56);
  const GradCheckReport rep2 = grad_check(m2, b, 1e-5);
  REQUIRE_FALSE(rep2.relu_present);
  REQUIRE(std::isinf(rep2.relu_kink_proximity));
}

TEST_CASE("qbptt equals hand-written real backprop on the expanded network") {
  // Independent oracle: a plain real affine-tanh backward pass over the
  // block-expanded weight matrix, projected back onto the quaternion
  // components through the 16 basis positions each weight occupies.
  Rng rng(29);
  ModelSpec spec;
  spec.input_width = 12;
  spec.layers = {{LayerKind::qdense, 2, Activation::tanh}};
  Model m = build_model(spec, 64);
  auto& l = std::get<DenseLayer<QuaternionAlgebra>>(m.layers[0]);
  l.bias = random_tensor<QuaternionAlgebra>(rng, 2, 1, 0.3);

  Batch b = mse_batch(rng, 1, 12, 8, 3);

  const GradientSet analytic = qbptt(m, b);

  // Real forward/backward, written out longhand.
  const Mat r_weight = qnn::testing::expand_via_qmat(l.weight);
  const Mat r_bias = to_real(l.bias);
  const Mat& x = b.inputs[0];
  const Mat pre = (r_weight * x).colwise() + Eigen::VectorXd(r_bias);
  const Mat post = pre.array().tanh().matrix();
  const double count = static_cast<double>(post.size());
  const Mat seed = 2.0 * (post - b.target.dense[0]) / count;
  const Mat dpre = seed.cwiseProduct(Mat((1.0 - pre.array().tanh().square()).matrix()));
  const Mat d_r_weight = dpre * x.transpose();
  const Mat d_r_bias = dpre.rowwise().sum();

  // Project the real gradient onto the quaternion components.
  const Index M = l.weight.rows(), N = l.weight.cols();
  QTensor projected = QTensor::zero(M, N);
  using QA = QuaternionAlgebra;
  for (int a = 0; a < 4; ++a) {
    for (int bb = 0; bb < 4; ++bb) {
      const int c = QA::mul_comp[a][bb];
      const double s = QA::mul_sign[a][bb];
      projected.planes[a] += s * d_r_weight.block(c * M, bb * N, M, N);
    }
  }

  for (int c = 0; c < 4; ++c)
    REQUIRE((projected.planes[c] - analytic.tensors[0].planes[c]).cwiseAbs().maxCoeff() <
            1e-10);

  // Bias components each appear once in the expanded bias, so the real bias
  // gradient is just the stacked quaternion one.
  QTensor bias_grad;
  for (int c = 0; c < 4; ++c) bias_grad.planes[c] = analytic.tensors[1].planes[c];
  REQUIRE((to_real(bias_grad) - d_r_bias).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("input gradients point downhill") {
  Rng rng(31);
  ModelSpec spec;
  spec.input_width = 8;
  spec.layers = {{LayerKind::qrnn, 3, Activation::tanh, Activation::tanh}};
  Model m = build_model(spec, 90);
  Batch b = mse_batch(rng, 3, 8, 12, 2);

  Model::ForwardCache cache;
  m.forward(b.inputs, &cache);
  SeqMat seed;
  const double before = loss_value(cache.outputs, b.target, b.loss, &seed);
  SeqMat dinput = m.backward(cache, seed, nullptr);

  const double eta = 1e-3;
  Batch stepped = b;
  for (std::size_t t = 0; t < stepped.inputs.size(); ++t)
    stepped.inputs[t] -= eta * dinput[t];
  const double after = model_loss(m, stepped);
  REQUIRE(after < before);
}
