// Efficiency accounting: static operation counts per connection, exact
// parameter-count ratios for matched real/quaternion models, and wall-clock
// throughput measurements. Parameter and operation counts are exact
// integers; timing numbers are reported, never asserted.

#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "qnn/grad.hpp"
#include "qnn/model.hpp"

namespace qnn {

enum class ConnectionKind { real, quaternion };

/// Operations needed to push one connection's contribution into the output
/// accumulator. The real case is a multiply-accumulate (2 ops). The
/// quaternion case is counted statically from the Hamilton product table:
/// components^2 multiplies plus components*(components-1) additions, i.e.
/// 16 + 12 = 28.
inline int ops_per_connection(ConnectionKind kind) {
  switch (kind) {
    case ConnectionKind::real: return 2;
    case ConnectionKind::quaternion: {
      constexpr int nc = QuaternionAlgebra::components;
      int multiplies = 0, additions = 0;
      for (int a = 0; a < nc; ++a)
        for (int b = 0; b < nc; ++b) {
          ++multiplies;  // one real product per basis pair
          (void)QuaternionAlgebra::mul_comp[a][b];
        }
      // Each output component accumulates nc terms -> nc - 1 additions.
      additions = nc * (nc - 1);
      return multiplies + additions;
    }
  }
  throw UnknownIdError("unknown connection kind");
}

/// Ops to produce the same 4 real outputs from 4 real inputs with a dense
/// real block: 16 multiply-accumulates.
inline int real_block_ops_per_quaternion_bundle() { return 16 * 2; }

struct BenchRow {
  std::string config;
  std::int64_t real_params = 0;
  std::int64_t quat_params = 0;
  double param_ratio = 0.0;  // real / quaternion, exact from integers
  int ops_real = 2;
  int ops_quat = 28;
  double fwd_real_sps = 0.0;  // sequences per second
  double fwd_quat_sps = 0.0;
  double bwd_real_sps = 0.0;  // forward + backward
  double bwd_quat_sps = 0.0;
  double slowdown_fwd = 0.0;  // real rate / quaternion rate
  double slowdown_bwd = 0.0;
  double checksum_real = 0.0;  // output checksums, bit-stable across runs
  double checksum_quat = 0.0;
};

struct BenchConfig {
  LayerKind real_kind = LayerKind::lstm;
  LayerKind quat_kind = LayerKind::qlstm;
  int real_width = 64;  // matched: quaternion units = real_width / 4
  int steps = 20;
  int batch = 8;
  double seconds_per_measurement = 0.5;
  std::uint64_t seed = 1;
};

namespace detail {

inline double checksum(const SeqMat& out) {
  double acc = 0.0;
  for (const Mat& m : out) acc += m.sum();
  return acc;
}

template <class Fn>
double rate_per_second(Fn&& body, double seconds) {
  using clock = std::chrono::steady_clock;
  body();  // warm-up
  int iters = 0;
  const auto start = clock::now();
  double elapsed = 0.0;
  do {
    body();
    ++iters;
    elapsed = std::chrono::duration<double>(clock::now() - start).count();
  } while (elapsed < seconds);
  return iters / elapsed;
}

}  // namespace detail

/// Benchmarks one matched real/quaternion pair (equal real signal width).
inline BenchRow throughput_bench(const BenchConfig& cfg) {
  if (cfg.real_width % 4 != 0)
    throw ConfigError("throughput_bench: matched width must be a multiple of 4");

  ModelSpec real_spec, quat_spec;
  real_spec.input_width = cfg.real_width;
  quat_spec.input_width = cfg.real_width;
  LayerSpecEntry re{cfg.real_kind, cfg.real_width};
  LayerSpecEntry qe{cfg.quat_kind, cfg.real_width / 4};
  re.bias = false;
  qe.bias = false;
  real_spec.layers = {re};
  quat_spec.layers = {qe};

  BenchRow row;
  row.config = std::string(to_string(cfg.quat_kind)) + "-vs-" +
               std::string(to_string(cfg.real_kind)) + "-w" + std::to_string(cfg.real_width) +
               "-T" + std::to_string(cfg.steps);
  row.real_params = param_count(real_spec).total();
  row.quat_params = param_count(quat_spec).total();
  row.param_ratio = static_cast<double>(row.real_params) / static_cast<double>(row.quat_params);
  row.ops_real = ops_per_connection(ConnectionKind::real);
  row.ops_quat = ops_per_connection(ConnectionKind::quaternion);

  Model real_model = build_model(real_spec, cfg.seed);
  Model quat_model = build_model(quat_spec, cfg.seed + 1);

  Rng rng(cfg.seed + 2);
  SeqMat input;
  for (int t = 0; t < cfg.steps; ++t) {
    Mat m(cfg.real_width, cfg.batch);
    for (Index j = 0; j < cfg.batch; ++j)
      for (Index i = 0; i < cfg.real_width; ++i) m(i, j) = rng.uniform(-1.0, 1.0);
    input.push_back(std::move(m));
  }

  row.checksum_real = detail::checksum(real_model.forward(input, nullptr));
  row.checksum_quat = detail::checksum(quat_model.forward(input, nullptr));

  const double batch_size = cfg.batch;
  row.fwd_real_sps =
      batch_size * detail::rate_per_second([&] { real_model.forward(input, nullptr); },
                                           cfg.seconds_per_measurement);
  row.fwd_quat_sps =
      batch_size * detail::rate_per_second([&] { quat_model.forward(input, nullptr); },
                                           cfg.seconds_per_measurement);

  auto fwd_bwd = [&](Model& m) {
    Model::ForwardCache cache;
    const SeqMat out = m.forward(input, &cache);
    SeqMat dout;
    for (const Mat& frame : out) dout.push_back(Mat::Ones(frame.rows(), frame.cols()));
    GradientSet grads;
    m.backward(cache, dout, &grads);
  };
  row.bwd_real_sps = batch_size * detail::rate_per_second([&] { fwd_bwd(real_model); },
                                                          cfg.seconds_per_measurement);
  row.bwd_quat_sps = batch_size * detail::rate_per_second([&] { fwd_bwd(quat_model); },
                                                          cfg.seconds_per_measurement);

  row.slowdown_fwd = row.fwd_real_sps / row.fwd_quat_sps;
  row.slowdown_bwd = row.bwd_real_sps / row.bwd_quat_sps;
  return row;
}

}  // namespace qnn
