// RMSprop, learning-rate annealing and gradient clipping. The optimizer
// treats every quaternion component as an independent real parameter.

#pragma once

#include <cmath>
#include <vector>

#include "qnn/model.hpp"

namespace qnn {

struct RmspropState {
  std::vector<GradTensor> v;  // running mean of squared gradients

  static RmspropState zeros_like(Model& model) {
    RmspropState s;
    GradientSet z = model.zero_grads();
    s.v = std::move(z.tensors);
    return s;
  }
};

/// v <- decay v + (1 - decay) g^2;  p <- p - lr g / (sqrt(v) + eps)
inline void rmsprop_step(std::vector<ParamRef>& params, const GradientSet& grads,
                         RmspropState& state, double lr, double decay = 0.95,
                         double eps = 1e-8) {
  if (params.size() != grads.tensors.size() || params.size() != state.v.size())
    throw ShapeError("rmsprop_step: parameter/gradient/state misalignment");
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (int c = 0; c < params[k].components; ++c) {
      Mat& v = state.v[k].planes[c];
      const Mat& g = grads.tensors[k].planes[c];
      v = decay * v + (1.0 - decay) * g.cwiseProduct(g);
      params[k].planes[c]->noalias() -=
          lr * g.cwiseQuotient((v.cwiseSqrt().array() + eps).matrix());
    }
  }
}

/// Scales the gradient set so its global L2 norm is at most max_norm.
/// Returns the pre-clip norm. max_norm <= 0 disables clipping.
inline double clip_global_norm(GradientSet& grads, double max_norm) {
  const double norm = std::sqrt(grads.squared_norm());
  if (max_norm > 0.0 && norm > max_norm && norm > 0.0) grads *= max_norm / norm;
  return norm;
}

/// Halving-style annealing: lr shrinks by `factor` once the tail of the
/// validation history has gone `patience` consecutive epochs without
/// strictly improving on the best value seen before them. The first entry
/// counts as an improvement over the empty history.
inline double anneal(double lr, const std::vector<double>& val_history, double factor,
                     int patience = 1) {
  if (!(factor > 0.0 && factor < 1.0)) throw ConfigError("anneal: factor must be in (0, 1)");
  if (patience < 1) throw ConfigError("anneal: patience must be >= 1");
  int stall = 0;
  double best = std::numeric_limits<double>::infinity();
  for (double v : val_history) {
    if (v < best) {
      best = v;
      stall = 0;
    } else {
      ++stall;
    }
  }
  return (stall >= patience && stall % patience == 0) ? lr * factor : lr;
}

}  // namespace qnn
