// Dense, recurrent and LSTM layers, generic over the scalar algebra.
//
// Layers exchange signals in the split real wire format of tensor.hpp: a
// sequence of (width x batch) real matrices, one per timestep. Quaternion
// layers view a width of 4N as N quaternion units; real baselines are the
// same code instantiated with the 1-component algebra, so both families
// share one forward/backward/test harness.
//
// Forward passes cache every pre-activation and hidden state; backward
// passes are structured reverse accumulation over the planes. For the
// hypercomplex matmuls the accumulation rules are the conjugated-weight
// forms dW = dY (x) X^H and dX = W^H (x) dY (see gmatmul_backward).

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "qnn/activations.hpp"
#include "qnn/init.hpp"
#include "qnn/tensor.hpp"

namespace qnn {

/// A sequence of real-valued signal matrices (width x batch), one per step.
using SeqMat = std::vector<Mat>;

enum class LayerKind { dense, qdense, rnn, qrnn, lstm, qlstm };

inline std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::qdense: return "qdense";
    case LayerKind::rnn: return "rnn";
    case LayerKind::qrnn: return "qrnn";
    case LayerKind::lstm: return "lstm";
    case LayerKind::qlstm: return "qlstm";
  }
  return "?";
}

inline LayerKind parse_layer_kind(std::string_view s) {
  if (s == "dense") return LayerKind::dense;
  if (s == "qdense") return LayerKind::qdense;
  if (s == "rnn") return LayerKind::rnn;
  if (s == "qrnn") return LayerKind::qrnn;
  if (s == "lstm") return LayerKind::lstm;
  if (s == "qlstm") return LayerKind::qlstm;
  throw UnknownIdError("unknown layer kind: " + std::string(s));
}

inline bool is_quaternion_kind(LayerKind k) {
  return k == LayerKind::qdense || k == LayerKind::qrnn || k == LayerKind::qlstm;
}

struct LayerSpecEntry {
  LayerKind kind = LayerKind::dense;
  int units = 1;  // output units in the layer's own algebra (quaternions for q-kinds)
  Activation activation = Activation::tanh;
  // Output activation of the recurrent p_t head (rnn/qrnn only).
  Activation output_activation = Activation::identity;
  bool bidirectional = false;  // lstm/qlstm only
  bool bias = true;
};

struct ModelSpec {
  int input_width = 1;  // real width of the input wire
  std::vector<LayerSpecEntry> layers;
  double dropout = 0.0;  // applied between hidden layers, not after the last
  InitCriterion init = InitCriterion::glorot;
};

// ---------------------------------------------------------------------------
// Parameter bookkeeping

/// Mutable view of one parameter tensor (planes owned by a layer).
struct ParamRef {
  std::string name;
  int components = 1;
  std::array<Mat*, 4> planes{};  // first `components` entries valid
};

/// One owned gradient tensor, shape-mirroring a parameter tensor.
struct GradTensor {
  std::string name;
  int components = 1;
  std::array<Mat, 4> planes{};
};

/// Gradients for every parameter of a model, aligned with Model::params().
struct GradientSet {
  std::vector<GradTensor> tensors;

  void set_zero() {
    for (auto& t : tensors)
      for (int c = 0; c < t.components; ++c) t.planes[c].setZero();
  }
  GradientSet& operator+=(const GradientSet& o) {
    for (std::size_t i = 0; i < tensors.size(); ++i)
      for (int c = 0; c < tensors[i].components; ++c)
        tensors[i].planes[c] += o.tensors[i].planes[c];
    return *this;
  }
  GradientSet& operator*=(double s) {
    for (auto& t : tensors)
      for (int c = 0; c < t.components; ++c) t.planes[c] *= s;
    return *this;
  }
  double squared_norm() const {
    double total = 0.0;
    for (const auto& t : tensors)
      for (int c = 0; c < t.components; ++c) total += t.planes[c].squaredNorm();
    return total;
  }
  double max_abs() const {
    double worst = 0.0;
    for (const auto& t : tensors)
      for (int c = 0; c < t.components; ++c)
        if (t.planes[c].size() > 0) worst = std::max(worst, t.planes[c].cwiseAbs().maxCoeff());
    return worst;
  }
  bool all_finite() const {
    for (const auto& t : tensors)
      for (int c = 0; c < t.components; ++c)
        if (!t.planes[c].allFinite()) return false;
    return true;
  }
};

namespace detail {

template <class Alg>
void push_param(std::vector<ParamRef>& out, const std::string& name, GTensor<Alg>& t) {
  ParamRef ref;
  ref.name = name;
  ref.components = Alg::components;
  for (int c = 0; c < Alg::components; ++c) ref.planes[c] = &t.planes[c];
  out.push_back(std::move(ref));
}

inline void check_seq_width(const SeqMat& seq, Index width, const char* what) {
  if (seq.empty()) throw DegenerateInputError(std::string(what) + ": empty sequence");
  for (const Mat& m : seq)
    if (m.rows() != width)
      throw ShapeError(std::string(what) + ": signal width " + std::to_string(m.rows()) +
                       ", expected " + std::to_string(width));
}

/// Sum over batch columns, as a column tensor (bias gradient).
template <class Alg>
GTensor<Alg> colsum(const GTensor<Alg>& t) {
  GTensor<Alg> out;
  for (int c = 0; c < Alg::components; ++c) out.planes[c] = t.planes[c].rowwise().sum();
  return out;
}

/// Vertical concatenation in algebra units (used by bidirectional output).
template <class Alg>
GTensor<Alg> vcat(const GTensor<Alg>& top, const GTensor<Alg>& bottom) {
  GTensor<Alg> out(top.rows() + bottom.rows(), top.cols());
  for (int c = 0; c < Alg::components; ++c) {
    out.planes[c].topRows(top.rows()) = top.planes[c];
    out.planes[c].bottomRows(bottom.rows()) = bottom.planes[c];
  }
  return out;
}

template <class Alg>
GTensor<Alg> rows_of(const GTensor<Alg>& t, Index start, Index count) {
  GTensor<Alg> out;
  for (int c = 0; c < Alg::components; ++c) out.planes[c] = t.planes[c].middleRows(start, count);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dense layer: y = act(W (x) x + b), applied independently per timestep.

template <class Alg>
struct DenseLayer {
  using Tensor = GTensor<Alg>;

  Tensor weight;  // units_out x units_in
  Tensor bias;    // units_out x 1 (unused when has_bias is false)
  bool has_bias = true;
  Activation act = Activation::tanh;

  struct Cache {
    std::vector<Tensor> input;
    std::vector<Tensor> preact;
  };

  Index input_real_width() const { return weight.cols() * Alg::components; }
  Index output_real_width() const { return weight.rows() * Alg::components; }

  SeqMat forward(const SeqMat& in, Cache* cache) const {
    detail::check_seq_width(in, input_real_width(), "dense forward");
    SeqMat out;
    out.reserve(in.size());
    for (const Mat& frame : in) {
      Tensor x = from_real<Alg>(frame);
      Tensor pre = gmatmul(weight, x);
      if (has_bias) pre = add_bias(std::move(pre), bias);
      out.push_back(to_real(split_activation(pre, act)));
      if (cache) {
        cache->input.push_back(std::move(x));
        cache->preact.push_back(std::move(pre));
      }
    }
    return out;
  }

  SeqMat backward(const Cache& cache, const SeqMat& dout, std::vector<Tensor>* grads) const {
    SeqMat din(dout.size());
    Tensor dw = Tensor::zero(weight.rows(), weight.cols());
    Tensor db = Tensor::zero(weight.rows(), 1);
    for (std::size_t t = 0; t < dout.size(); ++t) {
      const Tensor dpost = from_real<Alg>(dout[t]);
      const Tensor dpre = split_activation_backward(cache.preact[t], dpost, act);
      Tensor dx = Tensor::zero(weight.cols(), dpre.cols());
      gmatmul_backward(weight, cache.input[t], dpre, &dw, &dx);
      if (has_bias) db += detail::colsum(dpre);
      din[t] = to_real(dx);
    }
    if (grads) {
      grads->push_back(std::move(dw));
      if (has_bias) grads->push_back(std::move(db));
    }
    return din;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    detail::push_param(out, prefix + ".W", weight);
    if (has_bias) detail::push_param(out, prefix + ".b", bias);
  }
};

// ---------------------------------------------------------------------------
// Simple recurrent layer with an output head:
//   h_t = act( W_hh (x) h_{t-1} + W_hx (x) x_t + b_h ),  h_0 = 0
//   p_t = out_act( W_hy (x) h_t )

template <class Alg>
struct RnnLayer {
  using Tensor = GTensor<Alg>;

  Tensor w_hx;  // hidden x input
  Tensor w_hh;  // hidden x hidden
  Tensor w_hy;  // output x hidden
  Tensor b_h;   // hidden x 1
  bool has_bias = true;
  Activation act = Activation::tanh;          // alpha
  Activation out_act = Activation::identity;  // beta

  struct StepResult {
    Tensor h, h_preact, p, p_preact;
  };

  struct Cache {
    std::vector<Tensor> input;     // x_t
    std::vector<Tensor> h_preact;  // pre-activations, needed by the backward pass
    std::vector<Tensor> h;
    std::vector<Tensor> p_preact;
  };

  Index input_real_width() const { return w_hx.cols() * Alg::components; }
  Index output_real_width() const { return w_hy.rows() * Alg::components; }
  Index hidden_units() const { return w_hh.rows(); }

  StepResult step(const Tensor& h_prev, const Tensor& x_t) const {
    StepResult r;
    r.h_preact = gmatmul(w_hh, h_prev);
    r.h_preact += gmatmul(w_hx, x_t);
    if (has_bias) r.h_preact = add_bias(std::move(r.h_preact), b_h);
    r.h = split_activation(r.h_preact, act);
    r.p_preact = gmatmul(w_hy, r.h);
    r.p = split_activation(r.p_preact, out_act);
    return r;
  }

  SeqMat forward(const SeqMat& in, Cache* cache) const {
    detail::check_seq_width(in, input_real_width(), "rnn forward");
    const Index batch = in[0].cols();
    Tensor h = Tensor::zero(hidden_units(), batch);
    SeqMat out;
    out.reserve(in.size());
    for (const Mat& frame : in) {
      Tensor x = from_real<Alg>(frame);
      StepResult r = step(h, x);
      h = r.h;
      out.push_back(to_real(r.p));
      if (cache) {
        cache->input.push_back(std::move(x));
        cache->h_preact.push_back(std::move(r.h_preact));
        cache->h.push_back(std::move(r.h));
        cache->p_preact.push_back(std::move(r.p_preact));
      }
    }
    return out;
  }

  SeqMat backward(const Cache& cache, const SeqMat& dout, std::vector<Tensor>* grads) const {
    const std::size_t steps = dout.size();
    const Index batch = dout[0].cols();
    Tensor dw_hx = Tensor::zero(w_hx.rows(), w_hx.cols());
    Tensor dw_hh = Tensor::zero(w_hh.rows(), w_hh.cols());
    Tensor dw_hy = Tensor::zero(w_hy.rows(), w_hy.cols());
    Tensor db_h = Tensor::zero(b_h.rows() > 0 ? b_h.rows() : hidden_units(), 1);
    SeqMat din(steps);

    Tensor dh_carry = Tensor::zero(hidden_units(), batch);
    for (std::size_t t = steps; t-- > 0;) {
      const Tensor dp = from_real<Alg>(dout[t]);
      const Tensor dp_pre = split_activation_backward(cache.p_preact[t], dp, out_act);
      Tensor dh = dh_carry;
      gmatmul_backward(w_hy, cache.h[t], dp_pre, &dw_hy, &dh);

      const Tensor dh_pre = split_activation_backward(cache.h_preact[t], dh, act);
      if (has_bias) db_h += detail::colsum(dh_pre);

      Tensor dx = Tensor::zero(w_hx.cols(), batch);
      gmatmul_backward(w_hx, cache.input[t], dh_pre, &dw_hx, &dx);
      din[t] = to_real(dx);

      dh_carry = Tensor::zero(hidden_units(), batch);
      if (t > 0) {
        gmatmul_backward(w_hh, cache.h[t - 1], dh_pre, &dw_hh, &dh_carry);
      } else {
        // h_0 = 0: the weight gradient term vanishes and nothing propagates.
        Tensor zero_prev = Tensor::zero(hidden_units(), batch);
        gmatmul_backward(w_hh, zero_prev, dh_pre, &dw_hh, static_cast<Tensor*>(nullptr));
      }
    }
    if (grads) {
      grads->push_back(std::move(dw_hx));
      grads->push_back(std::move(dw_hh));
      grads->push_back(std::move(dw_hy));
      if (has_bias) grads->push_back(std::move(db_h));
    }
    return din;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    detail::push_param(out, prefix + ".W_hx", w_hx);
    detail::push_param(out, prefix + ".W_hh", w_hh);
    detail::push_param(out, prefix + ".W_hy", w_hy);
    if (has_bias) detail::push_param(out, prefix + ".b_h", b_h);
  }
};

// ---------------------------------------------------------------------------
// LSTM layer. Gates use the split sigmoid over Hamilton-product
// pre-activations; the candidate and the output squashing use split tanh;
// the gate action is the component-wise product:
//   f_t = sig(W_f (x) x_t + R_f (x) h_{t-1} + b_f)        (i_t, o_t alike)
//   c_t = f_t . c_{t-1} + i_t . tanh(W_c (x) x_t + R_c (x) h_{t-1} + b_c)
//   h_t = o_t . tanh(c_t)

template <class Alg>
struct LstmLayer {
  using Tensor = GTensor<Alg>;

  // Gate order: f, i, o, candidate.
  struct Direction {
    std::array<Tensor, 4> w;  // hidden x input
    std::array<Tensor, 4> r;  // hidden x hidden
    std::array<Tensor, 4> b;  // hidden x 1
  };

  Direction fwd;
  Direction bwd;  // used only when bidirectional
  bool bidirectional = false;
  bool has_bias = true;

  struct StepState {
    std::array<Tensor, 4> preact;  // gate pre-activations
    std::array<Tensor, 4> gate;    // f, i, o, g post-activations
    Tensor c;
    Tensor tanh_c;
    Tensor h;
  };

  struct DirCache {
    std::vector<Tensor> input;  // x in pass order
    std::vector<StepState> states;
  };

  struct Cache {
    DirCache fwd;
    DirCache bwd;
  };

  Index input_real_width() const { return fwd.w[0].cols() * Alg::components; }
  Index hidden_units() const { return fwd.r[0].rows(); }
  Index output_real_width() const {
    return hidden_units() * (bidirectional ? 2 : 1) * Alg::components;
  }

  StepState step(const Direction& dir, const Tensor& h_prev, const Tensor& c_prev,
                 const Tensor& x_t) const {
    StepState s;
    for (int g = 0; g < 4; ++g) {
      s.preact[g] = gmatmul(dir.w[g], x_t);
      s.preact[g] += gmatmul(dir.r[g], h_prev);
      if (has_bias) s.preact[g] = add_bias(std::move(s.preact[g]), dir.b[g]);
    }
    for (int g = 0; g < 3; ++g) s.gate[g] = split_activation(s.preact[g], Activation::sigmoid);
    s.gate[3] = split_activation(s.preact[3], Activation::tanh);
    s.c = cwise_product(s.gate[0], c_prev) + cwise_product(s.gate[1], s.gate[3]);
    s.tanh_c = split_activation(s.c, Activation::tanh);
    s.h = cwise_product(s.gate[2], s.tanh_c);
    return s;
  }

  void run_direction(const Direction& dir, const std::vector<Tensor>& xs, DirCache& cache) const {
    const Index batch = xs[0].cols();
    Tensor h = Tensor::zero(hidden_units(), batch);
    Tensor c = Tensor::zero(hidden_units(), batch);
    for (const Tensor& x : xs) {
      StepState s = step(dir, h, c, x);
      h = s.h;
      c = s.c;
      cache.input.push_back(x);
      cache.states.push_back(std::move(s));
    }
  }

  SeqMat forward(const SeqMat& in, Cache* cache) const {
    detail::check_seq_width(in, input_real_width(), "lstm forward");
    const std::size_t steps = in.size();
    std::vector<Tensor> xs;
    xs.reserve(steps);
    for (const Mat& frame : in) xs.push_back(from_real<Alg>(frame));

    Cache local;
    Cache& c = cache ? *cache : local;
    run_direction(fwd, xs, c.fwd);

    SeqMat out(steps);
    if (!bidirectional) {
      for (std::size_t t = 0; t < steps; ++t) out[t] = to_real(c.fwd.states[t].h);
      return out;
    }
    std::vector<Tensor> rev(xs.rbegin(), xs.rend());
    run_direction(bwd, rev, c.bwd);
    for (std::size_t t = 0; t < steps; ++t) {
      // Backward pass state for original time t sits at reversed index.
      const Tensor& hb = c.bwd.states[steps - 1 - t].h;
      out[t] = to_real(detail::vcat(c.fwd.states[t].h, hb));
    }
    return out;
  }

  struct DirGrads {
    std::array<Tensor, 4> w, r, b;
  };

  /// Reverse pass over one direction. douts are in the direction's own pass
  /// order; returns d(input) in that same order.
  std::vector<Tensor> backward_direction(const Direction& dir, const DirCache& cache,
                                         const std::vector<Tensor>& dh_out,
                                         DirGrads& grads) const {
    const std::size_t steps = cache.states.size();
    const Index batch = cache.input[0].cols();
    const Index hid = hidden_units();
    for (int g = 0; g < 4; ++g) {
      grads.w[g] = Tensor::zero(dir.w[g].rows(), dir.w[g].cols());
      grads.r[g] = Tensor::zero(dir.r[g].rows(), dir.r[g].cols());
      grads.b[g] = Tensor::zero(hid, 1);
    }
    std::vector<Tensor> din(steps);

    Tensor dh_carry = Tensor::zero(hid, batch);
    Tensor dc_carry = Tensor::zero(hid, batch);
    for (std::size_t t = steps; t-- > 0;) {
      const StepState& s = cache.states[t];
      Tensor dh = dh_out[t] + dh_carry;

      // h = o . tanh(c)
      Tensor do_gate = cwise_product(dh, s.tanh_c);
      Tensor dc = dc_carry + cwise_product(split_activation_backward(s.c, dh, Activation::tanh),
                                           s.gate[2]);

      // c = f . c_prev + i . g
      const Tensor c_prev =
          t > 0 ? cache.states[t - 1].c : Tensor::zero(hid, batch);
      Tensor df_gate = cwise_product(dc, c_prev);
      Tensor di_gate = cwise_product(dc, s.gate[3]);
      Tensor dg = cwise_product(dc, s.gate[1]);

      std::array<Tensor, 4> dpre;
      dpre[0] = split_activation_backward(s.preact[0], df_gate, Activation::sigmoid);
      dpre[1] = split_activation_backward(s.preact[1], di_gate, Activation::sigmoid);
      dpre[2] = split_activation_backward(s.preact[2], do_gate, Activation::sigmoid);
      dpre[3] = split_activation_backward(s.preact[3], dg, Activation::tanh);

      Tensor dx = Tensor::zero(dir.w[0].cols(), batch);
      dh_carry = Tensor::zero(hid, batch);
      const Tensor h_prev = t > 0 ? cache.states[t - 1].h : Tensor::zero(hid, batch);
      for (int g = 0; g < 4; ++g) {
        gmatmul_backward(dir.w[g], cache.input[t], dpre[g], &grads.w[g], &dx);
        if (t > 0)
          gmatmul_backward(dir.r[g], h_prev, dpre[g], &grads.r[g], &dh_carry);
        else
          gmatmul_backward(dir.r[g], h_prev, dpre[g], &grads.r[g], static_cast<Tensor*>(nullptr));
        if (has_bias) grads.b[g] += detail::colsum(dpre[g]);
      }
      din[t] = dx;
      dc_carry = cwise_product(dc, s.gate[0]);  // through c_prev
    }
    return din;
  }

  SeqMat backward(const Cache& cache, const SeqMat& dout, std::vector<Tensor>* grads) const {
    const std::size_t steps = dout.size();
    const Index hid = hidden_units();

    std::vector<Tensor> dh_fwd(steps);
    std::vector<Tensor> dh_bwd;
    for (std::size_t t = 0; t < steps; ++t) {
      const Tensor d = from_real<Alg>(dout[t]);
      dh_fwd[t] = detail::rows_of(d, 0, hid);
      if (bidirectional) {
        if (dh_bwd.empty()) dh_bwd.resize(steps);
        // Bottom half belongs to the reversed pass at reversed index.
        dh_bwd[steps - 1 - t] = detail::rows_of(d, hid, hid);
      }
    }

    DirGrads gf;
    std::vector<Tensor> din_fwd = backward_direction(fwd, cache.fwd, dh_fwd, gf);
    SeqMat din(steps);
    if (!bidirectional) {
      for (std::size_t t = 0; t < steps; ++t) din[t] = to_real(din_fwd[t]);
    } else {
      DirGrads gb;
      std::vector<Tensor> din_bwd = backward_direction(bwd, cache.bwd, dh_bwd, gb);
      for (std::size_t t = 0; t < steps; ++t) {
        Tensor total = din_fwd[t] + din_bwd[steps - 1 - t];
        din[t] = to_real(total);
      }
      if (grads) append_dir_grads(*grads, gf, gb);
      return din;
    }
    if (grads) {
      DirGrads none;
      append_dir_grads(*grads, gf, none);
    }
    return din;
  }

  void append_dir_grads(std::vector<Tensor>& out, DirGrads& gf, DirGrads& gb) const {
    static constexpr const char* gate_names[4] = {"f", "i", "o", "c"};
    (void)gate_names;
    for (int g = 0; g < 4; ++g) {
      out.push_back(std::move(gf.w[g]));
      out.push_back(std::move(gf.r[g]));
      if (has_bias) out.push_back(std::move(gf.b[g]));
    }
    if (bidirectional)
      for (int g = 0; g < 4; ++g) {
        out.push_back(std::move(gb.w[g]));
        out.push_back(std::move(gb.r[g]));
        if (has_bias) out.push_back(std::move(gb.b[g]));
      }
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    static constexpr const char* gate_names[4] = {"f", "i", "o", "c"};
    for (int g = 0; g < 4; ++g) {
      detail::push_param(out, prefix + ".fwd.W_" + gate_names[g], fwd.w[g]);
      detail::push_param(out, prefix + ".fwd.R_" + gate_names[g], fwd.r[g]);
      if (has_bias) detail::push_param(out, prefix + ".fwd.b_" + gate_names[g], fwd.b[g]);
    }
    if (bidirectional)
      for (int g = 0; g < 4; ++g) {
        detail::push_param(out, prefix + ".bwd.W_" + gate_names[g], bwd.w[g]);
        detail::push_param(out, prefix + ".bwd.R_" + gate_names[g], bwd.r[g]);
        if (has_bias) detail::push_param(out, prefix + ".bwd.b_" + gate_names[g], bwd.b[g]);
      }
  }
};

}  // namespace qnn
