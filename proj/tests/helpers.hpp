// Shared helpers for the test suites: random generators and independent
// reference computations (oracles) kept away from the library code paths
// they are checking.

#pragma once

#include <Eigen/Dense>

#include "qnn/quaternion.hpp"
#include "qnn/rng.hpp"
#include "qnn/tensor.hpp"

namespace qnn::testing {

inline Quaternion random_quaternion(Rng& rng, double scale = 1.0) {
  return Quaternion(rng.uniform(-scale, scale), rng.uniform(-scale, scale),
                    rng.uniform(-scale, scale), rng.uniform(-scale, scale));
}

template <class Alg>
GTensor<Alg> random_tensor(Rng& rng, Index rows, Index cols, double scale = 1.0) {
  GTensor<Alg> t(rows, cols);
  for (int c = 0; c < Alg::components; ++c)
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) t.planes[c](i, j) = rng.uniform(-scale, scale);
  return t;
}

/// Oracle: Hamilton product via the Eq. 2 matrix representation,
/// vec(q1 (x) q2) = M(q1) * vec(q2). Independent of hamilton_product.
inline Quaternion hamilton_via_matrix(const Quaternion& a, const Quaternion& b) {
  const RealMat4 m = to_real_matrix(a);
  const double vb[4] = {b.r, b.x, b.y, b.z};
  double out[4] = {0, 0, 0, 0};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) out[i] += m[i][j] * vb[j];
  return Quaternion(out[0], out[1], out[2], out[3]);
}

/// Oracle: quaternion matrix product computed entry-by-entry from the
/// per-entry expanded 4x4 real representation (no plane-level shortcuts).
inline QTensor qmatmul_entrywise(const QTensor& w, const QTensor& x) {
  QTensor y = QTensor::zero(w.rows(), x.cols());
  for (Index m = 0; m < w.rows(); ++m)
    for (Index b = 0; b < x.cols(); ++b) {
      Quaternion acc(0, 0, 0, 0);
      for (Index n = 0; n < w.cols(); ++n)
        acc = acc + hamilton_via_matrix(get_quaternion(w, m, n), get_quaternion(x, n, b));
      set_quaternion(y, m, b, acc);
    }
  return y;
}

/// Oracle: build the expanded real weight matrix directly from per-entry
/// Eq. 2 blocks in the plane-stacked component ordering, bypassing
/// expand_to_real.
inline Mat expand_via_qmat(const QTensor& w) {
  const Index m = w.rows(), n = w.cols();
  Mat out = Mat::Zero(4 * m, 4 * n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) {
      const RealMat4 block = to_real_matrix(get_quaternion(w, i, j));
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) out(a * m + i, b * n + j) = block[a][b];
    }
  return out;
}

inline double max_abs_diff(const Mat& a, const Mat& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

template <class Alg>
double max_abs_diff(const GTensor<Alg>& a, const GTensor<Alg>& b) {
  double worst = 0.0;
  for (int c = 0; c < Alg::components; ++c)
    worst = std::max(worst, (a.planes[c] - b.planes[c]).cwiseAbs().maxCoeff());
  return worst;
}

}  // namespace qnn::testing
