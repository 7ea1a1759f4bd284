// Losses over the real wire format. MSE treats the four quaternion
// components as plain real coordinates; NLL applies a softmax over the
// flattened real output of each step and cross-entropy against integer
// class targets. Both return the seed gradient for backpropagation.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "qnn/errors.hpp"
#include "qnn/tensor.hpp"

namespace qnn {

enum class LossKind { mse, nll };

inline std::string_view to_string(LossKind k) { return k == LossKind::mse ? "mse" : "nll"; }

inline LossKind parse_loss(std::string_view s) {
  if (s == "mse") return LossKind::mse;
  if (s == "nll") return LossKind::nll;
  throw UnknownIdError("unknown loss kind: " + std::string(s));
}

/// Targets for a batch of sequences. Exactly one of `dense` / `classes` is
/// used, depending on the loss kind. With final_step_only set, only the
/// last timestep is scored (sequence-to-one tasks) and the target holds a
/// single step.
struct LossTarget {
  std::vector<Mat> dense;                   // mse: per scored step, width x batch
  std::vector<Eigen::VectorXi> classes;     // nll: per scored step, one id per batch column
  bool final_step_only = false;
};

/// A batch of input sequences with their targets.
struct Batch {
  std::vector<Mat> inputs;  // one (width x batch) frame per timestep
  LossTarget target;
  LossKind loss = LossKind::mse;
};

namespace detail {

inline Eigen::VectorXd softmax_column(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  Eigen::VectorXd e = (v.array() - m).exp();
  return e / e.sum();
}

}  // namespace detail

/// Computes the scalar loss and, when `seed` is non-null, the gradient of
/// the loss with respect to every output coefficient (same layout as
/// `outputs`, zero at unscored steps).
inline double loss_value(const std::vector<Mat>& outputs, const LossTarget& target,
                         LossKind kind, std::vector<Mat>* seed = nullptr) {
  if (outputs.empty()) throw DegenerateInputError("loss: empty output sequence");
  const std::size_t steps = outputs.size();
  const Index batch = outputs[0].cols();

  const std::size_t scored = target.final_step_only ? 1 : steps;
  const std::size_t first_scored = target.final_step_only ? steps - 1 : 0;

  if (seed) {
    seed->clear();
    for (const Mat& m : outputs) seed->push_back(Mat::Zero(m.rows(), m.cols()));
  }

  double total = 0.0;
  if (kind == LossKind::mse) {
    if (target.dense.size() != scored)
      throw ShapeError("mse: expected " + std::to_string(scored) + " target frames, got " +
                       std::to_string(target.dense.size()));
    double count = 0.0;
    for (std::size_t s = 0; s < scored; ++s) {
      const std::size_t t = first_scored + s;
      if (target.dense[s].rows() != outputs[t].rows() || target.dense[s].cols() != batch)
        throw ShapeError("mse: target frame shape mismatch");
      count += static_cast<double>(outputs[t].size());
    }
    for (std::size_t s = 0; s < scored; ++s) {
      const std::size_t t = first_scored + s;
      const Mat diff = outputs[t] - target.dense[s];
      total += diff.squaredNorm();
      if (seed) (*seed)[t] = 2.0 * diff / count;
    }
    return total / count;
  }

  // Negative log-likelihood: softmax over the flattened step output.
  if (target.classes.size() != scored)
    throw ShapeError("nll: expected " + std::to_string(scored) + " class frames, got " +
                     std::to_string(target.classes.size()));
  const double denom = static_cast<double>(scored) * static_cast<double>(batch);
  for (std::size_t s = 0; s < scored; ++s) {
    const std::size_t t = first_scored + s;
    const Index classes = outputs[t].rows();
    if (target.classes[s].size() != batch) throw ShapeError("nll: class frame batch mismatch");
    for (Index b = 0; b < batch; ++b) {
      const int label = target.classes[s](b);
      if (label < 0 || label >= classes)
        throw ShapeError("nll: class id " + std::to_string(label) + " outside [0, " +
                         std::to_string(classes) + ")");
      const Eigen::VectorXd probs = detail::softmax_column(outputs[t].col(b));
      total -= std::log(std::max(probs(label), 1e-300));
      if (seed) {
        Eigen::VectorXd g = probs / denom;
        g(label) -= 1.0 / denom;
        (*seed)[t].col(b) = g;
      }
    }
  }
  return total / denom;
}

}  // namespace qnn
