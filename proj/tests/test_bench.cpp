#include <catch2/catch_amalgamated.hpp>

#include "qnn/bench.hpp"

using namespace qnn;

TEST_CASE("operation counts per connection") {
  REQUIRE(ops_per_connection(ConnectionKind::quaternion) == 28);
  REQUIRE(ops_per_connection(ConnectionKind::real) == 2);
  // Per 4-real-value bundle the dense real equivalent needs 16 MACs.
  REQUIRE(real_block_ops_per_quaternion_bundle() == 32);
}

TEST_CASE("matched dense pair has an exact 4x parameter ratio") {
  BenchConfig cfg;
  cfg.real_kind = LayerKind::dense;
  cfg.quat_kind = LayerKind::qdense;
  cfg.real_width = 256;
  cfg.steps = 2;
  cfg.batch = 4;
  cfg.seconds_per_measurement = 0.05;
  const BenchRow row = throughput_bench(cfg);
  REQUIRE(row.real_params == 65536);
  REQUIRE(row.quat_params == 16384);
  REQUIRE(row.param_ratio == 4.0);
  REQUIRE(row.fwd_real_sps > 0.0);
  REQUIRE(row.fwd_quat_sps > 0.0);
  REQUIRE(row.slowdown_fwd > 0.0);
  REQUIRE(row.slowdown_fwd < 100.0);
}

TEST_CASE("bench measurement does not perturb model outputs") {
  BenchConfig cfg;
  cfg.real_kind = LayerKind::rnn;
  cfg.quat_kind = LayerKind::qrnn;
  cfg.real_width = 32;
  cfg.steps = 5;
  cfg.seconds_per_measurement = 0.05;
  const BenchRow a = throughput_bench(cfg);
  const BenchRow b = throughput_bench(cfg);
  // Checksums are computed before timing and must be bit-stable.
  REQUIRE(a.checksum_real == b.checksum_real);
  REQUIRE(a.checksum_quat == b.checksum_quat);
}

TEST_CASE("repeated throughput runs agree within 10 percent") {
  BenchConfig cfg;
  cfg.real_kind = LayerKind::dense;
  cfg.quat_kind = LayerKind::qdense;
  cfg.real_width = 64;
  cfg.steps = 4;
  cfg.seconds_per_measurement = 0.3;
  const BenchRow a = throughput_bench(cfg);
  const BenchRow b = throughput_bench(cfg);
  const double rel =
      std::fabs(a.fwd_quat_sps - b.fwd_quat_sps) / std::max(a.fwd_quat_sps, b.fwd_quat_sps);
  REQUIRE(rel < 0.10);
}

TEST_CASE("mismatched width is rejected") {
  BenchConfig cfg;
  cfg.real_width = 30;
  REQUIRE_THROWS_AS(throughput_bench(cfg), ConfigError);
}
