// Compile-time multiplication tables for the algebras the tensor code is
// generic over. A tensor entry with NC components multiplies another entry
// through the basis table e_a * e_b = sign(a,b) * e_comp(a,b); the real
// numbers are the 1-component case and quaternions the 4-component case
// with the Hamilton table. Layer and gradient code written once against
// this interface serves both the real baselines and the quaternion models.

#pragma once

#include <array>
#include <string_view>

namespace qnn {

struct RealAlgebra {
  static constexpr int components = 1;
  static constexpr std::string_view name = "real";
  static constexpr std::array<std::array<int, 1>, 1> mul_comp = {{{0}}};
  static constexpr std::array<std::array<double, 1>, 1> mul_sign = {{{1.0}}};
  // Conjugation is the identity on the reals.
  static constexpr std::array<double, 1> conj_sign = {1.0};
};

// Component order (r, i, j, k). The table encodes i^2 = j^2 = k^2 = ijk = -1:
// e.g. i*j = k, j*i = -k.
struct QuaternionAlgebra {
  static constexpr int components = 4;
  static constexpr std::string_view name = "quaternion";
  static constexpr std::array<std::array<int, 4>, 4> mul_comp = {{
      {0, 1, 2, 3},
      {1, 0, 3, 2},
      {2, 3, 0, 1},
      {3, 2, 1, 0},
  }};
  static constexpr std::array<std::array<double, 4>, 4> mul_sign = {{
      {+1.0, +1.0, +1.0, +1.0},
      {+1.0, -1.0, +1.0, -1.0},
      {+1.0, -1.0, -1.0, +1.0},
      {+1.0, +1.0, -1.0, -1.0},
  }};
  static constexpr std::array<double, 4> conj_sign = {1.0, -1.0, -1.0, -1.0};
};

}  // namespace qnn
