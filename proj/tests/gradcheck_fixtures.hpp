// Shared gradient-check fixtures for the unit and acceptance suites.
//
// Central differences at eps resolve a gradient coordinate g with absolute
// accuracy ~ ulp(L)/(2 eps), so the relative-error metric is only
// informative at coordinates whose true gradient clears that noise floor.
// Two constructions keep the test points well-conditioned without touching
// the metric or the tolerance:
//
//  * mse: targets are placed a small perturbation away from the model's
//    own outputs. The loss value L (and with it the FD noise) shrinks
//    quadratically in the residual while gradients shrink only linearly,
//    so every coordinate is resolvable.
//  * nll: the loss is pinned at ln C scale, so instead the test point is
//    chosen by a deterministic seed scan that maximizes the smallest
//    nonzero analytic gradient coordinate. The scan reads only the
//    analytic gradient (never the FD comparison), so a wrong analytic
//    gradient cannot select itself into passing: the FD check still
//    arbitrates at the chosen point. Exactly-zero coordinates are
//    structural (disconnected parameters) and are FD-exact.
//
// LSTM fixtures additionally strengthen the cell-state paths (forget/input
// gate bias, scaled weights): with c_0 = 0 the forget-gate parameters are
// weakly coupled at small depth and their gradients sit below the FD noise
// floor otherwise.

#pragma once

#include "qnn/grad.hpp"

namespace qnn::testing {

inline SeqMat random_signal(Rng& rng, std::size_t steps, Index width, Index batch,
                            double scale) {
  SeqMat seq;
  for (std::size_t t = 0; t < steps; ++t) {
    Mat m(width, batch);
    for (Index j = 0; j < batch; ++j)
      for (Index i = 0; i < width; ++i) m(i, j) = rng.uniform(-scale, scale);
    seq.push_back(std::move(m));
  }
  return seq;
}

/// Model for one grad-check cell. LSTM kinds get the strengthened cell
/// paths described above.
inline Model make_gradcheck_model(LayerKind kind, int units, std::uint64_t seed) {
  ModelSpec spec;
  spec.input_width = 8;
  LayerSpecEntry e{kind, units};
  e.activation = Activation::tanh;
  e.output_activation = Activation::tanh;
  spec.layers = {e};
  Model m = build_model(spec, seed);
  if (kind == LayerKind::qlstm) {
    auto& l = std::get<LstmLayer<QuaternionAlgebra>>(m.layers[0]);
    for (int g = 0; g < 4; ++g) {
      l.fwd.w[g] *= 2.0;
      l.fwd.r[g] *= 2.0;
    }
    for (Index i = 0; i < units; ++i) {
      set_quaternion(l.fwd.b[0], i, 0, Quaternion(1.0, 1.0, 1.0, 1.0));
      set_quaternion(l.fwd.b[1], i, 0, Quaternion(0.5, 0.5, 0.5, 0.5));
    }
  } else if (kind == LayerKind::lstm) {
    auto& l = std::get<LstmLayer<RealAlgebra>>(m.layers[0]);
    for (int g = 0; g < 4; ++g) {
      l.fwd.w[g] *= 2.0;
      l.fwd.r[g] *= 2.0;
    }
    l.fwd.b[0].planes[0].setConstant(1.0);
    l.fwd.b[1].planes[0].setConstant(0.5);
  }
  return m;
}

/// MSE batch with targets near the model's outputs (residual ~ 8e-4).
inline Batch near_mse_batch(Model& model, std::size_t steps, Index batch, Rng& rng) {
  Batch b;
  b.inputs = random_signal(rng, steps, model.input_real_width(), batch, 1.0);
  b.loss = LossKind::mse;
  const SeqMat out = model.forward(b.inputs, nullptr);
  for (const Mat& o : out) {
    Mat noise(o.rows(), o.cols());
    for (Index j = 0; j < o.cols(); ++j)
      for (Index i = 0; i < o.rows(); ++i) noise(i, j) = rng.uniform(-8e-4, 8e-4);
    b.target.dense.push_back(o + noise);
  }
  return b;
}

inline Batch random_nll_batch(Model& model, std::size_t steps, Index batch, Rng& rng) {
  Batch b;
  b.inputs = random_signal(rng, steps, model.input_real_width(), batch, 1.5);
  b.loss = LossKind::nll;
  const auto classes = static_cast<std::uint64_t>(model.output_real_width());
  for (std::size_t t = 0; t < steps; ++t) {
    Eigen::VectorXi cls(batch);
    for (Index j = 0; j < batch; ++j) cls(j) = static_cast<int>(rng.uniform_index(classes));
    b.target.classes.push_back(cls);
  }
  return b;
}

/// Smallest nonzero |coordinate| of a gradient set (structural zeros are
/// FD-exact and excluded).
inline double min_abs_nonzero(const GradientSet& g) {
  double mn = std::numeric_limits<double>::infinity();
  for (const auto& t : g.tensors)
    for (int c = 0; c < t.components; ++c)
      for (Index i = 0; i < t.planes[c].size(); ++i) {
        const double v = std::fabs(t.planes[c].data()[i]);
        if (v > 0.0) mn = std::min(mn, v);
      }
  return mn;
}

struct ConditionedPoint {
  Model model;
  Batch batch;
  std::uint64_t seed = 0;
  double min_coord = 0.0;
};

/// Deterministic scan for a well-conditioned NLL test point: the first seed
/// whose analytic gradient has no nonzero coordinate under `threshold`.
inline ConditionedPoint find_conditioned_nll_point(LayerKind kind, int units,
                                                   std::size_t steps, double threshold,
                                                   std::uint64_t base_seed = 1,
                                                   std::uint64_t max_scan = 200000) {
  double best = -1.0;
  ConditionedPoint best_point;
  for (std::uint64_t s = base_seed; s < base_seed + max_scan; ++s) {
    Model m = make_gradcheck_model(kind, units, s);
    Rng rng(s * 1315423911ull + 17);
    Batch b = random_nll_batch(m, steps, 2, rng);
    const GradientSet g = qbptt(m, b);
    const double mn = min_abs_nonzero(g);
    if (mn > best) {
      best = mn;
      best_point = {std::move(m), std::move(b), s, mn};
      if (best >= threshold) return best_point;
    }
  }
  return best_point;  // best found even if below threshold; caller decides
}

}  // namespace qnn::testing
