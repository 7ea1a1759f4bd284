// Model checkpoints. Layout (all integers little-endian u32, floats
// little-endian f64):
//   "QNN1" | input_width | dropout(f64) | init criterion | layer count
//   per layer: kind | units | activation | output activation |
//              bidirectional | bias
//   then every parameter tensor in declaration order, planes in
//   (r, i, j, k) order, coefficients column-major within a plane.

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "qnn/model.hpp"

namespace qnn {

namespace detail {

inline void put_u32(std::ofstream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

inline void put_f64(std::ofstream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(b, 8);
}

struct BinReader {
  std::string buf;
  std::size_t pos = 0;

  std::uint32_t u32() {
    if (pos + 4 > buf.size()) throw TruncatedFileError("checkpoint: truncated payload");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  double f64() {
    if (pos + 8 > buf.size()) throw TruncatedFileError("checkpoint: truncated payload");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
};

}  // namespace detail

inline void save_model(const std::string& path, Model& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_model: cannot open " + path);
  out.write("QNN1", 4);
  detail::put_u32(out, static_cast<std::uint32_t>(model.spec.input_width));
  detail::put_f64(out, model.spec.dropout);
  detail::put_u32(out, model.spec.init == InitCriterion::glorot ? 0u : 1u);
  detail::put_u32(out, static_cast<std::uint32_t>(model.spec.layers.size()));
  for (const LayerSpecEntry& e : model.spec.layers) {
    detail::put_u32(out, static_cast<std::uint32_t>(e.kind));
    detail::put_u32(out, static_cast<std::uint32_t>(e.units));
    detail::put_u32(out, static_cast<std::uint32_t>(e.activation));
    detail::put_u32(out, static_cast<std::uint32_t>(e.output_activation));
    detail::put_u32(out, e.bidirectional ? 1u : 0u);
    detail::put_u32(out, e.bias ? 1u : 0u);
  }
  for (const ParamRef& ref : model.params())
    for (int c = 0; c < ref.components; ++c) {
      const Mat& plane = *ref.planes[c];
      for (Index i = 0; i < plane.size(); ++i) detail::put_f64(out, plane.data()[i]);
    }
  if (!out) throw IoError("save_model: write failed for " + path);
}

inline Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_model: cannot open " + path);
  detail::BinReader r;
  {
    std::stringstream ss;
    ss << in.rdbuf();
    r.buf = ss.str();
  }
  if (r.buf.size() < 4 || r.buf.substr(0, 4) != "QNN1") {
    if (r.buf.size() >= 3 && r.buf.substr(0, 3) == "QNN")
      throw VersionMismatchError("checkpoint: unsupported format version");
    throw MagicMismatchError("checkpoint: bad magic");
  }
  r.pos = 4;

  ModelSpec spec;
  spec.input_width = static_cast<int>(r.u32());
  spec.dropout = r.f64();
  spec.init = r.u32() == 0 ? InitCriterion::glorot : InitCriterion::he;
  const std::uint32_t layer_count = r.u32();
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    LayerSpecEntry e;
    const std::uint32_t kind = r.u32();
    if (kind > static_cast<std::uint32_t>(LayerKind::qlstm))
      throw IoError("checkpoint: unknown layer kind tag " + std::to_string(kind));
    e.kind = static_cast<LayerKind>(kind);
    e.units = static_cast<int>(r.u32());
    e.activation = static_cast<Activation>(r.u32());
    e.output_activation = static_cast<Activation>(r.u32());
    e.bidirectional = r.u32() != 0;
    e.bias = r.u32() != 0;
    spec.layers.push_back(e);
  }

  Model model = build_model(spec, 0);
  for (const ParamRef& ref : model.params())
    for (int c = 0; c < ref.components; ++c) {
      Mat& plane = *ref.planes[c];
      for (Index i = 0; i < plane.size(); ++i) plane.data()[i] = r.f64();
    }
  if (r.pos != r.buf.size()) throw TruncatedFileError("checkpoint: trailing bytes");
  return model;
}

}  // namespace qnn
