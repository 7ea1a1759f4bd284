// Scalar activation catalogue used by the split activation functions.
// Fixed set so that the derivative table stays exact.

#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "qnn/errors.hpp"

namespace qnn {

enum class Activation { identity, tanh, sigmoid, relu };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::relu: return "relu";
  }
  return "?";
}

inline Activation parse_activation(std::string_view s) {
  if (s == "identity") return Activation::identity;
  if (s == "tanh") return Activation::tanh;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "relu") return Activation::relu;
  throw UnknownIdError("unknown activation function: " + std::string(s));
}

inline double activate(Activation a, double v) {
  switch (a) {
    case Activation::identity: return v;
    case Activation::tanh: return std::tanh(v);
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-v));
    case Activation::relu: return v > 0.0 ? v : 0.0;
  }
  throw UnknownIdError("unknown activation id");
}

/// Derivative as a function of the pre-activation value. The relu
/// subgradient at 0 is taken as 0.
inline double activate_deriv(Activation a, double v) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::tanh: {
      const double t = std::tanh(v);
      return 1.0 - t * t;
    }
    case Activation::sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-v));
      return s * (1.0 - s);
    }
    case Activation::relu: return v > 0.0 ? 1.0 : 0.0;
  }
  throw UnknownIdError("unknown activation id");
}

}  // namespace qnn
