// Scalar quaternion algebra: Hamilton product, conjugation, norms and the
// 4x4 real matrix representation of left multiplication.

#pragma once

#include <array>
#include <cmath>
#include <type_traits>

#include "qnn/errors.hpp"

namespace qnn {

/// 4x4 real matrix, row-major. Returned by to_real_matrix.
template <class Scalar>
using RealMat4T = std::array<std::array<Scalar, 4>, 4>;

using RealMat4 = RealMat4T<double>;

/// A quaternion r + x i + y j + z k. Components are checked finite on
/// construction; the algebra below is total over finite inputs.
template <class Scalar>
struct QuaternionT {
  static_assert(std::is_floating_point_v<Scalar>);

  Scalar r{0}, x{0}, y{0}, z{0};

  constexpr QuaternionT() = default;

  QuaternionT(Scalar r_, Scalar x_, Scalar y_, Scalar z_) : r(r_), x(x_), y(y_), z(z_) {
    if (!(std::isfinite(r) && std::isfinite(x) && std::isfinite(y) && std::isfinite(z)))
      throw DegenerateInputError("quaternion component is not finite");
  }

  friend bool operator==(const QuaternionT&, const QuaternionT&) = default;

  QuaternionT operator+(const QuaternionT& o) const {
    return QuaternionT(r + o.r, x + o.x, y + o.y, z + o.z);
  }
  QuaternionT operator-(const QuaternionT& o) const {
    return QuaternionT(r - o.r, x - o.x, y - o.y, z - o.z);
  }
  QuaternionT operator*(Scalar s) const { return QuaternionT(r * s, x * s, y * s, z * s); }
};

using Quaternion = QuaternionT<double>;

/// Hamilton product q1 (x) q2. Non-commutative.
template <class Scalar>
QuaternionT<Scalar> hamilton_product(const QuaternionT<Scalar>& a, const QuaternionT<Scalar>& b) {
  return QuaternionT<Scalar>(a.r * b.r - a.x * b.x - a.y * b.y - a.z * b.z,
                             a.r * b.x + a.x * b.r + a.y * b.z - a.z * b.y,
                             a.r * b.y - a.x * b.z + a.y * b.r + a.z * b.x,
                             a.r * b.z + a.x * b.y - a.y * b.x + a.z * b.r);
}

template <class Scalar>
QuaternionT<Scalar> conjugate(const QuaternionT<Scalar>& q) {
  return QuaternionT<Scalar>(q.r, -q.x, -q.y, -q.z);
}

template <class Scalar>
Scalar norm(const QuaternionT<Scalar>& q) {
  return std::sqrt(q.r * q.r + q.x * q.x + q.y * q.y + q.z * q.z);
}

/// q / |q|. The zero quaternion has no direction, so it is an error rather
/// than a silent zero: downstream unit-norm invariants must hold.
template <class Scalar>
QuaternionT<Scalar> normalize(const QuaternionT<Scalar>& q) {
  const Scalar n = norm(q);
  if (n == Scalar{0}) throw DegenerateInputError("cannot normalize the zero quaternion");
  return QuaternionT<Scalar>(q.r / n, q.x / n, q.y / n, q.z / n);
}

/// Left-multiplication matrix M(q): stacking p as (r, x, y, z), the product
/// q (x) p equals M(q) * vec(p). Satisfies M * M^T = |q|^2 * I.
template <class Scalar>
RealMat4T<Scalar> to_real_matrix(const QuaternionT<Scalar>& q) {
  return RealMat4T<Scalar>{{{q.r, -q.x, -q.y, -q.z},
                            {q.x, q.r, -q.z, q.y},
                            {q.y, q.z, q.r, -q.x},
                            {q.z, -q.y, q.x, q.r}}};
}

}  // namespace qnn
