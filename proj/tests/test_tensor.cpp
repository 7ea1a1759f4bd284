#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "helpers.hpp"
#include "qnn/tensor.hpp"

using namespace qnn;
using qnn::testing::expand_via_qmat;
using qnn::testing::max_abs_diff;
using qnn::testing::qmatmul_entrywise;
using qnn::testing::random_tensor;

TEST_CASE("plane storage agrees with the quaternion element view") {
  Rng rng(1);
  QTensor t = random_tensor<QuaternionAlgebra>(rng, 3, 2);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 2; ++j) {
      const Quaternion q = get_quaternion(t, i, j);
      REQUIRE(q.r == t.planes[0](i, j));
      REQUIRE(q.x == t.planes[1](i, j));
      REQUIRE(q.y == t.planes[2](i, j));
      REQUIRE(q.z == t.planes[3](i, j));
    }
}

TEST_CASE("gmatmul with identity and zero weights") {
  Rng rng(2);
  QTensor x = random_tensor<QuaternionAlgebra>(rng, 1, 1);

  QTensor w = QTensor::zero(1, 1);
  set_quaternion(w, 0, 0, Quaternion(1, 0, 0, 0));
  REQUIRE(max_abs_diff(gmatmul(w, x), x) == 0.0);

  QTensor wz = QTensor::zero(1, 1);
  QTensor y = gmatmul(wz, x);
  REQUIRE(max_abs_diff(y, QTensor::zero(1, 1)) == 0.0);
}

TEST_CASE("gmatmul rejects mismatched inner dimensions") {
  QTensor w = QTensor::zero(3, 2);
  QTensor x = QTensor::zero(3, 4);
  REQUIRE_THROWS_AS(gmatmul(w, x), ShapeError);
}

TEST_CASE("gmatmul matches the expanded real-matrix product") {
  Rng rng(3);
  QTensor w = random_tensor<QuaternionAlgebra>(rng, 3, 2);
  QTensor x = random_tensor<QuaternionAlgebra>(rng, 2, 4);

  const QTensor y = gmatmul(w, x);

  // Entry-wise Hamilton oracle.
  REQUIRE(max_abs_diff(y, qmatmul_entrywise(w, x)) < 1e-12);

  // Expanded 12x8 real product, expansion built independently from Eq. 2.
  const Mat expanded = expand_via_qmat(w);
  const Mat yr = expanded * to_real(x);
  REQUIRE(max_abs_diff(to_real(y), yr) < 1e-12);
}

TEST_CASE("gmatmul equals expanded real product on random shapes up to 8x8") {
  Rng rng(4);
  for (int trial = 0; trial < 25; ++trial) {
    const Index m = 1 + static_cast<Index>(rng.uniform_index(8));
    const Index n = 1 + static_cast<Index>(rng.uniform_index(8));
    const Index b = 1 + static_cast<Index>(rng.uniform_index(8));
    QTensor w = random_tensor<QuaternionAlgebra>(rng, m, n);
    QTensor x = random_tensor<QuaternionAlgebra>(rng, n, b);
    const Mat lhs = to_real(gmatmul(w, x));
    const Mat rhs = expand_via_qmat(w) * to_real(x);
    REQUIRE(max_abs_diff(lhs, rhs) < 1e-12);
    // Library expansion agrees with the per-entry construction.
    REQUIRE(max_abs_diff(expand_to_real(w), expand_via_qmat(w)) == 0.0);
  }
}

TEST_CASE("real algebra gmatmul is the plain matrix product") {
  Rng rng(5);
  RTensor w = random_tensor<RealAlgebra>(rng, 3, 5);
  RTensor x = random_tensor<RealAlgebra>(rng, 5, 2);
  REQUIRE(max_abs_diff(gmatmul(w, x).planes[0], Mat(w.planes[0] * x.planes[0])) < 1e-15);
}

TEST_CASE("split activation applies the scalar function per plane") {
  QTensor t = QTensor::zero(1, 1);
  set_quaternion(t, 0, 0, Quaternion(1, -1, 0, 100));

  const QTensor out = split_activation(t, Activation::tanh);
  const Quaternion q = get_quaternion(out, 0, 0);
  REQUIRE(q.r == Catch::Approx(0.7615941559557649).epsilon(1e-14));
  REQUIRE(q.x == Catch::Approx(-0.7615941559557649).epsilon(1e-14));
  REQUIRE(q.y == 0.0);
  REQUIRE(q.z == Catch::Approx(1.0).epsilon(1e-12));

  REQUIRE(max_abs_diff(split_activation(QTensor::zero(2, 3), Activation::tanh),
                       QTensor::zero(2, 3)) == 0.0);

  Rng rng(6);
  QTensor r = random_tensor<QuaternionAlgebra>(rng, 4, 4);
  REQUIRE(max_abs_diff(split_activation(r, Activation::identity), r) == 0.0);
}

TEST_CASE("unknown activation id is rejected") {
  REQUIRE_THROWS_AS(parse_activation("softsign"), UnknownIdError);
}

TEST_CASE("real view round trip and layout") {
  Rng rng(7);
  QTensor t = random_tensor<QuaternionAlgebra>(rng, 3, 2);
  const Mat flat = to_real(t);
  REQUIRE(flat.rows() == 12);
  REQUIRE(flat.cols() == 2);
  // Plane-stacked ordering: r block first, then i, j, k.
  REQUIRE(flat.block(0, 0, 3, 2) == t.planes[0]);
  REQUIRE(flat.block(9, 0, 3, 2) == t.planes[3]);
  const QTensor back = from_real<QuaternionAlgebra>(flat);
  REQUIRE(max_abs_diff(back, t) == 0.0);
}

TEST_CASE("conjugate and transpose of tensors") {
  Rng rng(8);
  QTensor t = random_tensor<QuaternionAlgebra>(rng, 2, 3);
  const QTensor ct = conjugate(transpose(t));
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 3; ++j) {
      const Quaternion q = get_quaternion(t, i, j);
      const Quaternion qc = get_quaternion(ct, j, i);
      REQUIRE(qc == conjugate(q));
    }
}

TEST_CASE("cwise product and bias broadcast") {
  Rng rng(9);
  QTensor a = random_tensor<QuaternionAlgebra>(rng, 2, 3);
  QTensor b = random_tensor<QuaternionAlgebra>(rng, 2, 3);
  const QTensor p = cwise_product(a, b);
  for (int c = 0; c < 4; ++c)
    REQUIRE(max_abs_diff(p.planes[c], Mat(a.planes[c].cwiseProduct(b.planes[c]))) == 0.0);

  QTensor bias = random_tensor<QuaternionAlgebra>(rng, 2, 1);
  const QTensor shifted = add_bias(a, bias);
  for (Index j = 0; j < 3; ++j) {
    const Quaternion got = get_quaternion(shifted, 1, j);
    const Quaternion want = get_quaternion(a, 1, j) + get_quaternion(bias, 1, 0);
    REQUIRE(norm(got - want) == 0.0);
  }
  REQUIRE_THROWS_AS(add_bias(a, random_tensor<QuaternionAlgebra>(rng, 3, 1)), ShapeError);
}
