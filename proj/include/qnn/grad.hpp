// Gradient computation and verification.
//
// qbptt runs the analytic backward pass (structured reverse accumulation
// over the split planes; see layers.hpp for the conjugated-weight rules).
// fd_oracle recomputes every gradient coefficient by central finite
// differences, re-running the full forward per probe; it shares no code
// with the backward pass and is the arbiter whenever the two disagree.

#pragma once

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "qnn/loss.hpp"
#include "qnn/model.hpp"

namespace qnn {

/// Evaluation-mode loss of the model on a batch (no dropout).
inline double model_loss(Model& model, const Batch& batch) {
  const SeqMat out = model.forward(batch.inputs, nullptr);
  return loss_value(out, batch.target, batch.loss);
}

/// Analytic gradients from a cached forward pass.
inline GradientSet qbptt(Model& model, const Model::ForwardCache& cache,
                         const LossTarget& target, LossKind loss_kind) {
  SeqMat seed;
  loss_value(cache.outputs, target, loss_kind, &seed);
  GradientSet grads;
  model.backward(cache, seed, &grads);
  return grads;
}

/// Forward-and-backward in one call.
inline GradientSet qbptt(Model& model, const Batch& batch) {
  Model::ForwardCache cache;
  model.forward(batch.inputs, &cache);
  return qbptt(model, cache, batch.target, batch.loss);
}

namespace detail {

inline int worker_thread_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  n = std::clamp(n, 1, 8);
  if (const char* env = std::getenv("QNN_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

}  // namespace detail

/// Central finite differences over every real parameter:
/// (L(p+eps) - L(p-eps)) / (2 eps). Probes run over disjoint index ranges
/// on private model copies, so the result is identical for any thread
/// count (QNN_THREADS caps the fan-out).
inline GradientSet fd_oracle(const Model& model, const Batch& batch, double eps = 1e-6) {
  if (!(eps >= 1e-8 && eps <= 1e-4))
    throw ConfigError("fd_oracle: eps must lie in [1e-8, 1e-4]");

  Model base = model;
  GradientSet grads;
  {
    GradientSet gz = base.zero_grads();
    grads = std::move(gz);
  }
  const std::vector<ParamRef> refs = base.params();

  // Flat index space over (tensor, component, coefficient).
  struct Slot {
    std::size_t tensor;
    int component;
    Index offset;
  };
  std::vector<Slot> slots;
  for (std::size_t k = 0; k < refs.size(); ++k)
    for (int c = 0; c < refs[k].components; ++c)
      for (Index i = 0; i < refs[k].planes[c]->size(); ++i)
        slots.push_back({k, c, i});

  const int threads = std::min<int>(detail::worker_thread_count(),
                                    std::max<std::size_t>(slots.size() / 64, 1));
  auto probe_range = [&](std::size_t lo, std::size_t hi) {
    Model local = model;
    std::vector<ParamRef> local_refs = local.params();
    for (std::size_t s = lo; s < hi; ++s) {
      const Slot& slot = slots[s];
      double* coeff = local_refs[slot.tensor].planes[slot.component]->data() + slot.offset;
      const double saved = *coeff;
      *coeff = saved + eps;
      const double up = model_loss(local, batch);
      *coeff = saved - eps;
      const double down = model_loss(local, batch);
      *coeff = saved;
      grads.tensors[slot.tensor].planes[slot.component].data()[slot.offset] =
          (up - down) / (2.0 * eps);
    }
  };

  if (threads <= 1) {
    probe_range(0, slots.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (slots.size() + threads - 1) / threads;
    for (int w = 0; w < threads; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(slots.size(), lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(probe_range, lo, hi);
    }
    for (auto& t : pool) t.join();
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Gradient check

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  double mean_rel_error = 0.0;
  // Worst coordinate, for diagnosing a broken plane.
  int worst_component = 0;
  Index worst_row = 0;
  Index worst_col = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  // Distance of the nearest relu pre-activation to its kink; finite
  // differences are untrustworthy when this is comparable to eps.
  double relu_kink_proximity = std::numeric_limits<double>::infinity();
  bool relu_present = false;
};

inline double relative_error(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-10});
}

namespace detail {

template <class Alg>
void scan_relu_preacts(const std::vector<GTensor<Alg>>& preacts, double& closest) {
  for (const auto& t : preacts)
    for (int c = 0; c < Alg::components; ++c)
      if (t.planes[c].size() > 0)
        closest = std::min(closest, t.planes[c].cwiseAbs().minCoeff());
}

}  // namespace detail

/// Minimum |pre-activation| over every relu in the stack (infinity when the
/// model uses no relu). LSTM gates are sigmoid/tanh and never contribute.
inline double min_abs_relu_preact(const Model& model, const Model::ForwardCache& cache) {
  double closest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    std::visit(
        [&](const auto& l) {
          using L = std::decay_t<decltype(l)>;
          const auto& lc = std::get<typename L::Cache>(cache.layer_caches[i]);
          if constexpr (requires { l.act; l.out_act; }) {  // recurrent layer
            if (l.act == Activation::relu) detail::scan_relu_preacts(lc.h_preact, closest);
            if (l.out_act == Activation::relu) detail::scan_relu_preacts(lc.p_preact, closest);
          } else if constexpr (requires { l.act; }) {  // dense layer
            if (l.act == Activation::relu) detail::scan_relu_preacts(lc.preact, closest);
          }
        },
        model.layers[i]);
  }
  return closest;
}

inline bool model_uses_relu(const Model& model) {
  for (const LayerSpecEntry& e : model.spec.layers)
    if (e.activation == Activation::relu || e.output_activation == Activation::relu) return true;
  return false;
}

/// Builds the per-parameter error report from two aligned gradient sets.
inline GradCheckReport compare_gradients(const GradientSet& analytic, const GradientSet& numeric,
                                         double tol) {
  if (analytic.tensors.size() != numeric.tensors.size())
    throw ShapeError("compare_gradients: gradient sets are not aligned");
  GradCheckReport report;
  report.tolerance = tol;
  for (std::size_t k = 0; k < analytic.tensors.size(); ++k) {
    const GradTensor& a = analytic.tensors[k];
    const GradTensor& n = numeric.tensors[k];
    ParamCheck pc;
    pc.name = a.name;
    double sum = 0.0;
    std::size_t count = 0;
    for (int c = 0; c < a.components; ++c)
      for (Index col = 0; col < a.planes[c].cols(); ++col)
        for (Index row = 0; row < a.planes[c].rows(); ++row) {
          const double av = a.planes[c](row, col);
          const double nv = n.planes[c](row, col);
          const double rel = relative_error(av, nv);
          sum += rel;
          ++count;
          if (rel > pc.max_rel_error) {
            pc.max_rel_error = rel;
            pc.worst_component = c;
            pc.worst_row = row;
            pc.worst_col = col;
            pc.analytic_at_worst = av;
            pc.numeric_at_worst = nv;
          }
        }
    pc.mean_rel_error = count > 0 ? sum / static_cast<double>(count) : 0.0;
    report.max_rel_error = std::max(report.max_rel_error, pc.max_rel_error);
    report.params.push_back(std::move(pc));
  }
  report.pass = report.max_rel_error <= tol;
  return report;
}

/// Runs qbptt and fd_oracle on the same batch and reports per-parameter
/// relative-error statistics. Passes iff the worst error is within tol.
inline GradCheckReport grad_check(Model& model, const Batch& batch, double tol,
                                  double eps = 1e-6) {
  if (!(tol > 0.0)) throw ConfigError("grad_check: tolerance must be positive");
  Model::ForwardCache cache;
  model.forward(batch.inputs, &cache);

  const GradientSet analytic = qbptt(model, cache, batch.target, batch.loss);
  const GradientSet numeric = fd_oracle(model, batch, eps);

  GradCheckReport report = compare_gradients(analytic, numeric, tol);
  report.relu_present = model_uses_relu(model);
  if (report.relu_present) report.relu_kink_proximity = min_abs_relu_preact(model, cache);
  return report;
}

}  // namespace qnn
