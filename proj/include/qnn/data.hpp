// Data pipeline: regression deltas over filterbank energies, acoustic
// quaternion assembly (energy + three time derivatives per frequency),
// synthetic sequence tasks, and the QFT1 feature file format.

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qnn/loss.hpp"
#include "qnn/rng.hpp"
#include "qnn/tensor.hpp"

namespace qnn {

// ---------------------------------------------------------------------------
// Deltas

/// Regression delta with window N = 2 and edge replication:
///   d_t = sum_{n=1..N} n (c_{t+n} - c_{t-n}) / (2 sum_{n=1..N} n^2)
inline std::vector<double> delta(const std::vector<double>& series) {
  if (series.size() < 2) throw DegenerateInputError("delta: series too short");
  constexpr int window = 2;
  constexpr double denom = 2.0 * (1 * 1 + 2 * 2);
  const auto n = static_cast<std::ptrdiff_t>(series.size());
  auto at = [&](std::ptrdiff_t i) {
    if (i < 0) i = 0;
    if (i >= n) i = n - 1;
    return series[static_cast<std::size_t>(i)];
  };
  std::vector<double> out(series.size());
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    double acc = 0.0;
    for (int k = 1; k <= window; ++k) acc += k * (at(t + k) - at(t - k));
    out[static_cast<std::size_t>(t)] = acc / denom;
  }
  return out;
}

/// Iterated delta: order 1 is delta, order 2 the delta of the delta, ...
inline std::vector<double> delta(const std::vector<double>& series, int order) {
  if (order < 1) throw ConfigError("delta: order must be >= 1");
  std::vector<double> out = series;
  for (int k = 0; k < order; ++k) out = delta(out);
  return out;
}

// ---------------------------------------------------------------------------
// Acoustic quaternions

struct EnergyMatrix {
  Mat values;  // F frequencies x T frames
  double frame_shift_ms = 10.0;
};

struct QuaternionSequence {
  QTensor frames;           // F quaternion features x T frames
  std::vector<int> labels;  // optional per-frame class ids (empty if none)

  Index features() const { return frames.rows(); }
  Index steps() const { return frames.cols(); }
};

/// Packs each (f, t) energy with its first three time derivatives into one
/// quaternion: Q(f,t) = e + (de/dt) i + (d2e/dt2) j + (d3e/dt3) k.
inline QuaternionSequence assemble_quaternions(const EnergyMatrix& energy) {
  const Index f_count = energy.values.rows();
  const Index t_count = energy.values.cols();
  if (f_count < 1) throw DegenerateInputError("assemble_quaternions: no frequency bands");
  if (t_count < 4)
    throw DegenerateInputError("assemble_quaternions: need at least 4 frames for third-order deltas");
  QuaternionSequence seq;
  seq.frames = QTensor::zero(f_count, t_count);
  std::vector<double> row(static_cast<std::size_t>(t_count));
  for (Index f = 0; f < f_count; ++f) {
    for (Index t = 0; t < t_count; ++t) row[static_cast<std::size_t>(t)] = energy.values(f, t);
    const std::vector<double> d1 = delta(row);
    const std::vector<double> d2 = delta(d1);
    const std::vector<double> d3 = delta(d2);
    for (Index t = 0; t < t_count; ++t) {
      const auto i = static_cast<std::size_t>(t);
      seq.frames.planes[0](f, t) = row[i];
      seq.frames.planes[1](f, t) = d1[i];
      seq.frames.planes[2](f, t) = d2[i];
      seq.frames.planes[3](f, t) = d3[i];
    }
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Synthetic tasks

enum class TaskKind { adding, copy, identity };

inline std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::adding: return "adding";
    case TaskKind::copy: return "copy";
    case TaskKind::identity: return "identity";
  }
  return "?";
}

inline TaskKind parse_task(std::string_view s) {
  if (s == "adding") return TaskKind::adding;
  if (s == "copy") return TaskKind::copy;
  if (s == "identity") return TaskKind::identity;
  throw UnknownIdError("unknown task: " + std::string(s));
}

struct TaskSpec {
  TaskKind kind = TaskKind::adding;
  int seq_len = 30;
  int width = 8;  // identity: real feature width; copy: vocabulary size
  int train_count = 1024;
  int val_count = 256;
  std::uint64_t seed = 0;
};

/// One example: inputs are a real signal (width x T); exactly one of the
/// dense / class targets is populated.
struct Sample {
  Mat inputs;
  Mat dense_target;                 // (target width x scored steps)
  std::vector<int> class_target;    // per-step class ids
};

struct Dataset {
  TaskSpec spec;
  LossKind loss = LossKind::mse;
  bool final_step_only = false;
  Index input_width = 0;   // real wire width (multiple of 4)
  Index target_width = 0;  // mse: real width; nll: class count
  std::vector<Sample> train;
  std::vector<Sample> val;
};

namespace detail {

inline Index pad4(Index w) { return (w + 3) / 4 * 4; }

inline Sample make_adding_sample(int seq_len, Rng& rng) {
  Sample s;
  s.inputs = Mat::Zero(4, seq_len);  // (value, marker, 0, 0) per step
  const auto t1 = static_cast<Index>(rng.uniform_index(seq_len / 2));
  const auto t2 =
      static_cast<Index>(seq_len / 2 + rng.uniform_index(seq_len - seq_len / 2));
  double total = 0.0;
  for (Index t = 0; t < seq_len; ++t) {
    const double value = rng.uniform();
    s.inputs(0, t) = value;
    if (t == t1 || t == t2) {
      s.inputs(1, t) = 1.0;
      total += value;
    }
  }
  s.dense_target = Mat::Constant(1, 1, total);
  return s;
}

inline Sample make_copy_sample(int seq_len, int vocab, Rng& rng) {
  // Prefix of L symbols, blank gap, recall marker; the target asks for the
  // prefix again over the last L steps and blank everywhere else.
  const int prefix = std::max(1, std::min(seq_len / 3, 5));
  Sample s;
  const Index onehot = vocab + 2;  // blank, symbols, recall marker
  s.inputs = Mat::Zero(pad4(onehot), seq_len);
  std::vector<int> symbols(prefix);
  for (int i = 0; i < prefix; ++i)
    symbols[i] = 1 + static_cast<int>(rng.uniform_index(vocab));
  for (Index t = 0; t < seq_len; ++t) {
    int sym = 0;
    if (t < prefix) sym = symbols[static_cast<std::size_t>(t)];
    else if (t == seq_len - prefix - 1) sym = vocab + 1;
    s.inputs(sym, t) = 1.0;
  }
  s.class_target.assign(static_cast<std::size_t>(seq_len), 0);
  for (int i = 0; i < prefix; ++i)
    s.class_target[static_cast<std::size_t>(seq_len - prefix + i)] = symbols[i];
  return s;
}

inline Sample make_identity_sample(int seq_len, Index width, Rng& rng) {
  Sample s;
  s.inputs = Mat::Zero(pad4(width), seq_len);
  for (Index t = 0; t < seq_len; ++t)
    for (Index i = 0; i < width; ++i) s.inputs(i, t) = rng.uniform(-1.0, 1.0);
  s.dense_target = s.inputs;
  return s;
}

}  // namespace detail

/// Generates a dataset with deterministic bytes for a given spec.
inline Dataset gen_task(const TaskSpec& spec) {
  if (spec.train_count < 1 || spec.val_count < 1)
    throw ConfigError("gen_task: sample counts must be positive");
  if (spec.seq_len < 2) throw ConfigError("gen_task: sequence length must be >= 2");
  if (spec.kind == TaskKind::copy && spec.seq_len < 2 * std::max(1, std::min(spec.seq_len / 3, 5)) + 1)
    throw ConfigError("gen_task: copy task sequence too short for its prefix");

  Dataset ds;
  ds.spec = spec;
  Rng root(spec.seed);
  Rng train_rng = root.derive(0x7261696e);
  Rng val_rng = root.derive(0x76616c69);

  auto make = [&](Rng& rng) {
    switch (spec.kind) {
      case TaskKind::adding: return detail::make_adding_sample(spec.seq_len, rng);
      case TaskKind::copy: return detail::make_copy_sample(spec.seq_len, spec.width, rng);
      case TaskKind::identity: return detail::make_identity_sample(spec.seq_len, spec.width, rng);
    }
    throw UnknownIdError("unknown task kind");
  };

  for (int i = 0; i < spec.train_count; ++i) ds.train.push_back(make(train_rng));
  for (int i = 0; i < spec.val_count; ++i) ds.val.push_back(make(val_rng));

  ds.input_width = ds.train.front().inputs.rows();
  switch (spec.kind) {
    case TaskKind::adding:
      ds.loss = LossKind::mse;
      ds.final_step_only = true;
      ds.target_width = 1;
      break;
    case TaskKind::copy:
      ds.loss = LossKind::nll;
      ds.final_step_only = false;
      ds.target_width = spec.width + 1;  // blank + symbols
      break;
    case TaskKind::identity:
      ds.loss = LossKind::mse;
      ds.final_step_only = false;
      ds.target_width = ds.input_width;
      break;
  }
  return ds;
}

/// Collates samples [begin, end) into a batch of column-stacked signals.
inline Batch collate(const Dataset& ds, const std::vector<Sample>& pool,
                     const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw DegenerateInputError("collate: empty index set");
  const auto steps = static_cast<std::size_t>(pool[indices[0]].inputs.cols());
  const Index width = pool[indices[0]].inputs.rows();
  const auto batch_n = static_cast<Index>(indices.size());

  Batch b;
  b.loss = ds.loss;
  b.target.final_step_only = ds.final_step_only;
  b.inputs.assign(steps, Mat::Zero(width, batch_n));
  for (std::size_t t = 0; t < steps; ++t)
    for (Index j = 0; j < batch_n; ++j) b.inputs[t].col(j) = pool[indices[j]].inputs.col(t);

  if (ds.loss == LossKind::mse) {
    const std::size_t scored = ds.final_step_only ? 1 : steps;
    b.target.dense.assign(scored, Mat::Zero(ds.target_width, batch_n));
    for (std::size_t s = 0; s < scored; ++s)
      for (Index j = 0; j < batch_n; ++j)
        b.target.dense[s].col(j) = pool[indices[j]].dense_target.col(s);
  } else {
    const std::size_t scored = ds.final_step_only ? 1 : steps;
    b.target.classes.assign(scored, Eigen::VectorXi::Zero(batch_n));
    for (std::size_t s = 0; s < scored; ++s)
      for (Index j = 0; j < batch_n; ++j)
        b.target.classes[s](j) = pool[indices[j]].class_target[s];
  }
  return b;
}

// ---------------------------------------------------------------------------
// Feature files: magic "QFT1", u32 F, u32 T, u32 flags, then f32
// little-endian payload in (t, f, component) order. Flag bit 0 marks an
// appended track of per-frame u32 labels.

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  std::uint32_t u32() {
    if (pos + 4 > buf.size()) throw TruncatedFileError("feature file: truncated payload");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
};

}  // namespace detail

inline constexpr std::uint32_t kFeatureLabelFlag = 1u;

inline void write_features(const std::string& path, const QuaternionSequence& seq) {
  std::string out;
  out += "QFT1";
  detail::put_u32(out, static_cast<std::uint32_t>(seq.features()));
  detail::put_u32(out, static_cast<std::uint32_t>(seq.steps()));
  const bool labelled = !seq.labels.empty();
  if (labelled && seq.labels.size() != static_cast<std::size_t>(seq.steps()))
    throw ShapeError("write_features: label track length must match the frame count");
  detail::put_u32(out, labelled ? kFeatureLabelFlag : 0u);
  for (Index t = 0; t < seq.steps(); ++t)
    for (Index f = 0; f < seq.features(); ++f)
      for (int c = 0; c < 4; ++c)
        detail::put_f32(out, static_cast<float>(seq.frames.planes[c](f, t)));
  if (labelled)
    for (int label : seq.labels) detail::put_u32(out, static_cast<std::uint32_t>(label));

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("write_features: cannot open " + path);
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("write_features: write failed for " + path);
}

inline QuaternionSequence read_features(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("read_features: cannot open " + path);
  std::stringstream ss;
  ss << file.rdbuf();
  const std::string buf = ss.str();

  if (buf.size() < 4 || buf.substr(0, 4) != "QFT1") {
    if (buf.size() >= 3 && buf.substr(0, 3) == "QFT")
      throw VersionMismatchError("feature file: unsupported format version");
    throw MagicMismatchError("feature file: bad magic");
  }
  detail::Reader r{buf, 4};
  const std::uint32_t f_count = r.u32();
  const std::uint32_t t_count = r.u32();
  const std::uint32_t flags = r.u32();
  if (f_count == 0 || t_count == 0)
    throw DegenerateInputError("feature file: empty dimensions");

  QuaternionSequence seq;
  seq.frames = QTensor::zero(f_count, t_count);
  for (std::uint32_t t = 0; t < t_count; ++t)
    for (std::uint32_t f = 0; f < f_count; ++f)
      for (int c = 0; c < 4; ++c) seq.frames.planes[c](f, t) = r.f32();
  if (flags & kFeatureLabelFlag) {
    seq.labels.resize(t_count);
    for (std::uint32_t t = 0; t < t_count; ++t)
      seq.labels[t] = static_cast<int>(r.u32());
  }
  if (r.pos != buf.size()) throw TruncatedFileError("feature file: trailing bytes");
  return seq;
}

/// CSV import with header row `t,f,e`: one energy value per line.
inline EnergyMatrix read_energy_csv(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw IoError("read_energy_csv: cannot open " + path);
  std::string line;
  if (!std::getline(file, line)) throw TruncatedFileError("energy csv: empty file");
  auto strip = [](std::string s) {
    s.erase(s.find_last_not_of(" \t\r\n") + 1);
    s.erase(0, s.find_first_not_of(" \t\r\n"));
    return s;
  };
  if (strip(line) != "t,f,e") throw MagicMismatchError("energy csv: expected header 't,f,e'");

  struct Entry {
    int t, f;
    double e;
  };
  std::vector<Entry> entries;
  int max_t = -1, max_f = -1;
  std::size_t line_no = 1;
  while (std::getline(file, line)) {
    ++line_no;
    if (strip(line).empty()) continue;
    std::istringstream row(line);
    Entry entry{};
    char c1 = 0, c2 = 0;
    if (!(row >> entry.t >> c1 >> entry.f >> c2 >> entry.e) || c1 != ',' || c2 != ',')
      throw IoError("energy csv: malformed row at line " + std::to_string(line_no));
    entries.push_back(entry);
    max_t = std::max(max_t, entry.t);
    max_f = std::max(max_f, entry.f);
  }
  if (entries.empty()) throw TruncatedFileError("energy csv: no data rows");
  EnergyMatrix energy;
  energy.values = Mat::Zero(max_f + 1, max_t + 1);
  for (const Entry& e : entries) energy.values(e.f, e.t) = e.e;
  return energy;
}

}  // namespace qnn
