// Model assembly: a stack of layers exchanging split real signals, with
// inverted dropout between hidden layers at the granularity of the
// producing layer's algebra (a dropped quaternion loses all four
// components together).

#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "qnn/layers.hpp"
#include "qnn/rng.hpp"

namespace qnn {

using LayerVar = std::variant<DenseLayer<RealAlgebra>, DenseLayer<QuaternionAlgebra>,
                              RnnLayer<RealAlgebra>, RnnLayer<QuaternionAlgebra>,
                              LstmLayer<RealAlgebra>, LstmLayer<QuaternionAlgebra>>;

using LayerCacheVar =
    std::variant<std::monostate, typename DenseLayer<RealAlgebra>::Cache,
                 typename DenseLayer<QuaternionAlgebra>::Cache,
                 typename RnnLayer<RealAlgebra>::Cache,
                 typename RnnLayer<QuaternionAlgebra>::Cache,
                 typename LstmLayer<RealAlgebra>::Cache,
                 typename LstmLayer<QuaternionAlgebra>::Cache>;

struct Model {
  ModelSpec spec;
  std::vector<LayerVar> layers;

  struct ForwardCache {
    std::vector<LayerCacheVar> layer_caches;
    std::vector<SeqMat> dropout_masks;  // empty mask sequence = not applied
    SeqMat outputs;
  };

  Index input_real_width() const { return spec.input_width; }

  Index output_real_width() const {
    Index w = spec.input_width;
    for (const auto& layer : layers)
      std::visit([&](const auto& l) { w = l.output_real_width(); }, layer);
    return w;
  }

  int components_of_layer(std::size_t idx) const {
    return std::visit(
        [](const auto& l) {
          return std::decay_t<decltype(l)>::Tensor::Algebra::components;
        },
        layers[idx]);
  }

  /// Runs the stack. In training mode with a dropout rate > 0, a fresh
  /// inverted-dropout mask is sampled per hidden layer output and timestep.
  SeqMat forward(const SeqMat& input, ForwardCache* cache, bool train_mode = false,
                 Rng* dropout_rng = nullptr) const {
    detail::check_seq_width(input, spec.input_width, "model forward");
    SeqMat signal = input;
    if (cache) {
      cache->layer_caches.clear();
      cache->dropout_masks.assign(layers.size(), SeqMat{});
    }
    const bool use_dropout = train_mode && spec.dropout > 0.0 && dropout_rng;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      std::visit(
          [&](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            if (cache) {
              cache->layer_caches.emplace_back(std::in_place_type<typename L::Cache>);
              signal = l.forward(signal, &std::get<typename L::Cache>(cache->layer_caches.back()));
            } else {
              signal = l.forward(signal, nullptr);
            }
          },
          layers[i]);
      if (use_dropout && i + 1 < layers.size()) {
        const int nc = components_of_layer(i);
        SeqMat masks;
        masks.reserve(signal.size());
        for (Mat& frame : signal) {
          Mat mask = sample_dropout_mask(frame.rows(), frame.cols(), nc, spec.dropout,
                                         *dropout_rng);
          frame = frame.cwiseProduct(mask);
          masks.push_back(std::move(mask));
        }
        if (cache) cache->dropout_masks[i] = std::move(masks);
      }
    }
    if (cache) cache->outputs = signal;
    return signal;
  }

  /// Reverse accumulation through the stack. `dout` is dLoss/dOutputs;
  /// gradients land in `grads` aligned with params(). Returns dLoss/dInput.
  SeqMat backward(const ForwardCache& cache, const SeqMat& dout, GradientSet* grads) {
    if (cache.layer_caches.size() != layers.size())
      throw ShapeError("model backward: cache does not match the layer stack");
    SeqMat dsignal = dout;
    std::vector<std::vector<GradTensor>> per_layer(layers.size());
    for (std::size_t i = layers.size(); i-- > 0;) {
      if (!cache.dropout_masks[i].empty()) {
        for (std::size_t t = 0; t < dsignal.size(); ++t)
          dsignal[t] = dsignal[t].cwiseProduct(cache.dropout_masks[i][t]);
      }
      std::visit(
          [&](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            using Alg = typename L::Tensor::Algebra;
            const auto& lc = std::get<typename L::Cache>(cache.layer_caches[i]);
            std::vector<typename L::Tensor> layer_grads;
            dsignal = l.backward(lc, dsignal, grads ? &layer_grads : nullptr);
            if (grads) {
              for (auto& g : layer_grads) {
                GradTensor gt;
                gt.components = Alg::components;
                for (int c = 0; c < Alg::components; ++c) gt.planes[c] = std::move(g.planes[c]);
                per_layer[i].push_back(std::move(gt));
              }
            }
          },
          layers[i]);
    }
    if (grads) {
      grads->tensors.clear();
      for (auto& lg : per_layer)
        for (auto& g : lg) grads->tensors.push_back(std::move(g));
      const auto refs = params();
      if (refs.size() != grads->tensors.size())
        throw ShapeError("model backward: gradient/parameter count mismatch");
      for (std::size_t k = 0; k < refs.size(); ++k) grads->tensors[k].name = refs[k].name;
    }
    return dsignal;
  }

  std::vector<ParamRef> params() {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string prefix = "layer" + std::to_string(i);
      std::visit([&](auto& l) { l.collect_params(prefix, out); }, layers[i]);
    }
    return out;
  }

  GradientSet zero_grads() {
    GradientSet gs;
    for (const ParamRef& ref : params()) {
      GradTensor gt;
      gt.name = ref.name;
      gt.components = ref.components;
      for (int c = 0; c < ref.components; ++c)
        gt.planes[c] = Mat::Zero(ref.planes[c]->rows(), ref.planes[c]->cols());
      gs.tensors.push_back(std::move(gt));
    }
    return gs;
  }

  static Mat sample_dropout_mask(Index rows, Index cols, int components, double rate, Rng& rng) {
    const Index units = rows / components;
    Mat mask(rows, cols);
    const double scale = 1.0 / (1.0 - rate);
    for (Index b = 0; b < cols; ++b)
      for (Index u = 0; u < units; ++u) {
        const double v = rng.bernoulli(rate) ? 0.0 : scale;
        for (int c = 0; c < components; ++c) mask(c * units + u, b) = v;
      }
    return mask;
  }
};

// ---------------------------------------------------------------------------
// Construction

namespace detail {

template <class Alg>
DenseLayer<Alg> make_dense(const LayerSpecEntry& e, Index in_units, Rng& rng,
                           InitCriterion crit) {
  DenseLayer<Alg> l;
  l.act = e.activation;
  l.has_bias = e.bias;
  if constexpr (Alg::components == 4) {
    l.weight = quaternion_init(crit, static_cast<int>(in_units), e.units, e.units, in_units, rng);
  } else {
    l.weight = real_init(crit, static_cast<int>(in_units), e.units, e.units, in_units, rng);
  }
  l.bias = GTensor<Alg>::zero(e.units, 1);
  return l;
}

template <class Alg>
RnnLayer<Alg> make_rnn(const LayerSpecEntry& e, Index in_units, Rng& rng, InitCriterion crit) {
  RnnLayer<Alg> l;
  l.act = e.activation;
  l.out_act = e.output_activation;
  l.has_bias = e.bias;
  const int h = e.units;
  auto init = [&](Index rows, Index cols, int n_in, int n_out) {
    if constexpr (Alg::components == 4)
      return quaternion_init(crit, n_in, n_out, rows, cols, rng);
    else
      return real_init(crit, n_in, n_out, rows, cols, rng);
  };
  l.w_hx = init(h, in_units, static_cast<int>(in_units), h);
  l.w_hh = init(h, h, h, h);
  l.w_hy = init(h, h, h, h);  // output head keeps the hidden width
  l.b_h = GTensor<Alg>::zero(h, 1);
  return l;
}

template <class Alg>
LstmLayer<Alg> make_lstm(const LayerSpecEntry& e, Index in_units, Rng& rng, InitCriterion crit) {
  LstmLayer<Alg> l;
  l.bidirectional = e.bidirectional;
  l.has_bias = e.bias;
  const int h = e.units;
  auto fill = [&](typename LstmLayer<Alg>::Direction& d) {
    for (int g = 0; g < 4; ++g) {
      if constexpr (Alg::components == 4) {
        d.w[g] = quaternion_init(crit, static_cast<int>(in_units), h, h, in_units, rng);
        d.r[g] = quaternion_init(crit, h, h, h, h, rng);
      } else {
        d.w[g] = real_init(crit, static_cast<int>(in_units), h, h, in_units, rng);
        d.r[g] = real_init(crit, h, h, h, h, rng);
      }
      d.b[g] = GTensor<Alg>::zero(h, 1);
    }
    // Forget-gate bias starts at one so the fresh cell state persists.
    if (e.bias)
      for (int c = 0; c < Alg::components; ++c) d.b[0].planes[c].setConstant(1.0);
  };
  fill(l.fwd);
  if (l.bidirectional) fill(l.bwd);
  return l;
}

}  // namespace detail

/// Builds and initializes a model. Each parameter tensor draws from its own
/// deterministically derived sub-stream of the seed, so layer parameters do
/// not depend on the sampling order of other layers.
inline Model build_model(const ModelSpec& spec, std::uint64_t seed) {
  if (spec.layers.empty()) throw ConfigError("model spec has no layers");
  if (spec.input_width < 1) throw ConfigError("model input width must be positive");
  if (spec.dropout < 0.0 || spec.dropout >= 1.0)
    throw ConfigError("dropout rate must be in [0, 1)");
  Model m;
  m.spec = spec;
  Rng root(seed);
  Index width = spec.input_width;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpecEntry& e = spec.layers[i];
    if (e.units < 1) throw ConfigError("layer units must be positive");
    Rng stream = root.derive(0x10000 + i);
    const bool quat = is_quaternion_kind(e.kind);
    if (quat && width % 4 != 0)
      throw ConfigError("layer " + std::to_string(i) +
                        ": quaternion layer input width must be a multiple of 4, got " +
                        std::to_string(width));
    const Index in_units = quat ? width / 4 : width;
    switch (e.kind) {
      case LayerKind::dense:
        m.layers.emplace_back(detail::make_dense<RealAlgebra>(e, in_units, stream, spec.init));
        break;
      case LayerKind::qdense:
        m.layers.emplace_back(
            detail::make_dense<QuaternionAlgebra>(e, in_units, stream, spec.init));
        break;
      case LayerKind::rnn:
        m.layers.emplace_back(detail::make_rnn<RealAlgebra>(e, in_units, stream, spec.init));
        break;
      case LayerKind::qrnn:
        m.layers.emplace_back(
            detail::make_rnn<QuaternionAlgebra>(e, in_units, stream, spec.init));
        break;
      case LayerKind::lstm:
        m.layers.emplace_back(detail::make_lstm<RealAlgebra>(e, in_units, stream, spec.init));
        break;
      case LayerKind::qlstm:
        m.layers.emplace_back(
            detail::make_lstm<QuaternionAlgebra>(e, in_units, stream, spec.init));
        break;
    }
    std::visit([&](const auto& l) { width = l.output_real_width(); }, m.layers.back());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Parameter counting (exact integer arithmetic; a quaternion weight
// contributes 4 real parameters)

struct LayerParamCount {
  LayerKind kind;
  std::int64_t weights = 0;  // real parameters in weight matrices
  std::int64_t biases = 0;   // real parameters in bias vectors
  std::int64_t total() const { return weights + biases; }
};

struct ParamCount {
  std::vector<LayerParamCount> per_layer;
  std::int64_t weights = 0;
  std::int64_t biases = 0;
  std::int64_t total() const { return weights + biases; }
};

inline ParamCount param_count(const ModelSpec& spec) {
  ParamCount out;
  std::int64_t width = spec.input_width;
  for (const LayerSpecEntry& e : spec.layers) {
    const bool quat = is_quaternion_kind(e.kind);
    if (quat && width % 4 != 0)
      throw ConfigError("param_count: quaternion layer input width must be a multiple of 4");
    const std::int64_t in_units = quat ? width / 4 : width;
    const std::int64_t per_entry = quat ? 4 : 1;
    const std::int64_t h = e.units;
    LayerParamCount c;
    c.kind = e.kind;
    std::int64_t out_units = h;
    switch (e.kind) {
      case LayerKind::dense:
      case LayerKind::qdense:
        c.weights = per_entry * h * in_units;
        c.biases = e.bias ? per_entry * h : 0;
        break;
      case LayerKind::rnn:
      case LayerKind::qrnn:
        c.weights = per_entry * (h * in_units + h * h + h * h);  // W_hx, W_hh, W_hy
        c.biases = e.bias ? per_entry * h : 0;
        break;
      case LayerKind::lstm:
      case LayerKind::qlstm: {
        const std::int64_t dirs = e.bidirectional ? 2 : 1;
        c.weights = dirs * per_entry * 4 * (h * in_units + h * h);
        c.biases = e.bias ? dirs * per_entry * 4 * h : 0;
        out_units = h * dirs;
        break;
      }
    }
    out.per_layer.push_back(c);
    out.weights += c.weights;
    out.biases += c.biases;
    width = out_units * per_entry;
  }
  return out;
}

}  // namespace qnn
