// Hypercomplex tensors stored as split real planes.
//
// A GTensor<Algebra> is a rows x cols matrix of algebra elements held as
// `components` equally shaped real matrices (plane-major storage). The
// Hamilton matrix product then decomposes into components^2 plane-level
// real matrix products, which is how gmatmul and its backward pass are
// implemented. QTensor is the quaternion instantiation used throughout;
// RTensor (one plane) carries the real baselines through the same code.

#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>

#include "qnn/activations.hpp"
#include "qnn/algebra.hpp"
#include "qnn/errors.hpp"
#include "qnn/quaternion.hpp"

namespace qnn {

using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

template <class Alg>
struct GTensor {
  using Algebra = Alg;
  static constexpr int NC = Alg::components;

  std::array<Mat, NC> planes;

  GTensor() {
    for (auto& p : planes) p.resize(0, 0);
  }
  GTensor(Index rows, Index cols) { resize(rows, cols); }

  static GTensor zero(Index rows, Index cols) {
    GTensor t;
    for (auto& p : t.planes) p = Mat::Zero(rows, cols);
    return t;
  }

  void resize(Index rows, Index cols) {
    for (auto& p : planes) p = Mat::Zero(rows, cols);
  }

  Index rows() const { return planes[0].rows(); }
  Index cols() const { return planes[0].cols(); }
  Index size() const { return planes[0].size(); }
  /// Number of real coefficients (entries times components).
  Index real_size() const { return size() * NC; }

  void set_zero() {
    for (auto& p : planes) p.setZero();
  }

  GTensor& operator+=(const GTensor& o) {
    for (int c = 0; c < NC; ++c) planes[c] += o.planes[c];
    return *this;
  }
  GTensor& operator-=(const GTensor& o) {
    for (int c = 0; c < NC; ++c) planes[c] -= o.planes[c];
    return *this;
  }
  GTensor& operator*=(double s) {
    for (auto& p : planes) p *= s;
    return *this;
  }
  friend GTensor operator+(GTensor a, const GTensor& b) { return a += b; }
  friend GTensor operator-(GTensor a, const GTensor& b) { return a -= b; }
  friend GTensor operator*(GTensor a, double s) { return a *= s; }
};

using QTensor = GTensor<QuaternionAlgebra>;
using RTensor = GTensor<RealAlgebra>;

// ---------------------------------------------------------------------------
// Element access (quaternion view)

inline Quaternion get_quaternion(const QTensor& t, Index row, Index col) {
  return Quaternion(t.planes[0](row, col), t.planes[1](row, col), t.planes[2](row, col),
                    t.planes[3](row, col));
}

inline void set_quaternion(QTensor& t, Index row, Index col, const Quaternion& q) {
  t.planes[0](row, col) = q.r;
  t.planes[1](row, col) = q.x;
  t.planes[2](row, col) = q.y;
  t.planes[3](row, col) = q.z;
}

// ---------------------------------------------------------------------------
// Algebra-valued matrix product

namespace detail {
inline void check_inner(Index wcols, Index xrows, const char* what) {
  if (wcols != xrows)
    throw ShapeError(std::string(what) + ": inner dimensions disagree (" +
                     std::to_string(wcols) + " vs " + std::to_string(xrows) + ")");
}
}  // namespace detail

/// Y = W (x) X, entry (m,b) = sum_n W(m,n) (x) X(n,b). For quaternions this
/// is the Hamilton matrix product of Eq. (5) applied entry-wise; it equals
/// the expanded structured real product of expand_to_real below.
template <class Alg>
GTensor<Alg> gmatmul(const GTensor<Alg>& w, const GTensor<Alg>& x) {
  detail::check_inner(w.cols(), x.rows(), "gmatmul");
  GTensor<Alg> y = GTensor<Alg>::zero(w.rows(), x.cols());
  for (int a = 0; a < Alg::components; ++a)
    for (int b = 0; b < Alg::components; ++b)
      y.planes[Alg::mul_comp[a][b]] += Alg::mul_sign[a][b] * (w.planes[a] * x.planes[b]);
  return y;
}

/// Reverse-mode rule for Y = W (x) X given dL/dY. Writing X^H and W^H for
/// the conjugate transpose, the accumulated gradients are
///   dW += dY (x) X^H   and   dX += W^H (x) dY,
/// which is the conjugated-weight propagation of the hypercomplex chain
/// rule. Expanded plane-wise below to avoid materializing the conjugates.
template <class Alg>
void gmatmul_backward(const GTensor<Alg>& w, const GTensor<Alg>& x, const GTensor<Alg>& dy,
                      GTensor<Alg>* dw, GTensor<Alg>* dx) {
  for (int a = 0; a < Alg::components; ++a)
    for (int b = 0; b < Alg::components; ++b) {
      const int c = Alg::mul_comp[a][b];
      const double s = Alg::mul_sign[a][b];
      if (dw) dw->planes[a] += s * (dy.planes[c] * x.planes[b].transpose());
      if (dx) dx->planes[b] += s * (w.planes[a].transpose() * dy.planes[c]);
    }
}

// ---------------------------------------------------------------------------
// Entry-wise operations

template <class Alg>
GTensor<Alg> conjugate(GTensor<Alg> t) {
  for (int c = 0; c < Alg::components; ++c) t.planes[c] *= Alg::conj_sign[c];
  return t;
}

template <class Alg>
GTensor<Alg> transpose(const GTensor<Alg>& t) {
  GTensor<Alg> out;
  for (int c = 0; c < Alg::components; ++c) out.planes[c] = t.planes[c].transpose();
  return out;
}

/// Component-wise product (one real multiply per coefficient; not the
/// Hamilton product). This is the gate action of the QLSTM.
template <class Alg>
GTensor<Alg> cwise_product(const GTensor<Alg>& a, const GTensor<Alg>& b) {
  GTensor<Alg> out;
  for (int c = 0; c < Alg::components; ++c)
    out.planes[c] = a.planes[c].cwiseProduct(b.planes[c]);
  return out;
}

/// Adds a bias column vector to every column of x.
template <class Alg>
GTensor<Alg> add_bias(GTensor<Alg> x, const GTensor<Alg>& bias) {
  if (bias.rows() != x.rows() || bias.cols() != 1)
    throw ShapeError("add_bias: bias must be a column vector matching the signal rows");
  for (int c = 0; c < Alg::components; ++c) x.planes[c].colwise() += Eigen::VectorXd(bias.planes[c]);
  return x;
}

/// Split activation (Eq. 7): f applied independently to each plane.
template <class Alg>
GTensor<Alg> split_activation(const GTensor<Alg>& x, Activation f) {
  GTensor<Alg> out;
  for (int c = 0; c < Alg::components; ++c)
    out.planes[c] = x.planes[c].unaryExpr([f](double v) { return activate(f, v); });
  return out;
}

/// Derivative of the split activation at the cached pre-activation,
/// multiplied into the upstream gradient.
template <class Alg>
GTensor<Alg> split_activation_backward(const GTensor<Alg>& preact, const GTensor<Alg>& dout,
                                       Activation f) {
  GTensor<Alg> out;
  for (int c = 0; c < Alg::components; ++c)
    out.planes[c] = dout.planes[c].cwiseProduct(
        preact.planes[c].unaryExpr([f](double v) { return activate_deriv(f, v); }));
  return out;
}

// ---------------------------------------------------------------------------
// Real (split) views
//
// The real wire format stacks the planes vertically: a rows x cols tensor
// becomes a (components*rows) x cols real matrix whose first block holds
// the r parts, then the i, j, k parts. This matches splitting an input
// vector of size 4N into four parts of size N.

template <class Alg>
Mat to_real(const GTensor<Alg>& t) {
  Mat out(t.rows() * Alg::components, t.cols());
  for (int c = 0; c < Alg::components; ++c)
    out.middleRows(c * t.rows(), t.rows()) = t.planes[c];
  return out;
}

template <class Alg>
GTensor<Alg> from_real(const Mat& m) {
  if (m.rows() % Alg::components != 0)
    throw ShapeError("from_real: row count not divisible by the component count");
  const Index rows = m.rows() / Alg::components;
  GTensor<Alg> t;
  for (int c = 0; c < Alg::components; ++c) t.planes[c] = m.middleRows(c * rows, rows);
  return t;
}

/// Structured real expansion of a weight tensor: the (components*M) x
/// (components*N) real matrix R with to_real(W (x) X) = R * to_real(X).
/// Each quaternion weight appears in 16 positions, one per basis product.
template <class Alg>
Mat expand_to_real(const GTensor<Alg>& w) {
  const Index m = w.rows(), n = w.cols();
  Mat out = Mat::Zero(Alg::components * m, Alg::components * n);
  for (int a = 0; a < Alg::components; ++a)
    for (int b = 0; b < Alg::components; ++b)
      out.block(Alg::mul_comp[a][b] * m, b * n, m, n) += Alg::mul_sign[a][b] * w.planes[a];
  return out;
}

}  // namespace qnn
