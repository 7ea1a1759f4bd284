// Command-line entry point. Subcommands: train, eval, gradcheck,
// init-stats, bench, features, gen-task. Every run writes its effective
// configuration and artifacts into a self-describing run directory.
// Exit codes: 0 success, 1 validation failure, 2 usage error.

#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "qnn/bench.hpp"
#include "qnn/checkpoint.hpp"
#include "qnn/train.hpp"

namespace qnn::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// <out>/<sub>-<timestamp>-s<seed>, or <out>/<run_name> when given.
inline fs::path make_run_dir(const std::string& out, const std::string& sub,
                             std::uint64_t seed, const std::string& run_name) {
  fs::path base(out.empty() ? "runs" : out);
  fs::create_directories(base);
  if (!run_name.empty()) {
    fs::path dir = base / run_name;
    fs::create_directories(dir);
    return dir;
  }
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm_utc);
  std::string name = sub + "-" + stamp + "-s" + std::to_string(seed);
  fs::path dir = base / name;
  for (int k = 1; fs::exists(dir); ++k) dir = base / (name + "-" + std::to_string(k));
  fs::create_directories(dir);
  return dir;
}

/// Snapshot of the effective option values, flat key = value text.
inline void write_effective_config(const CLI::App& cmd, const fs::path& dir) {
  std::ofstream out(dir / "config.txt");
  out << "[" << cmd.get_name() << "]\n";
  for (const CLI::Option* opt : cmd.get_options()) {
    const std::string name = opt->get_lnames().empty() ? "" : opt->get_lnames()[0];
    if (name.empty() || name == "help" || name == "config") continue;
    std::string value;
    if (!opt->results().empty()) {
      for (const std::string& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
    }
    out << name << " = " << value << "\n";
  }
}

struct ModelFlags {
  std::string model = "qlstm";
  int units = 16;
  int layers = 1;
  std::uint64_t seed = 0;
  double dropout = 0.2;
};

/// Recurrent stack plus a linear read-out head sized for the task.
inline ModelSpec model_spec_for(const ModelFlags& flags, Index input_width,
                                Index head_width) {
  ModelSpec spec;
  spec.input_width = static_cast<int>(input_width);
  const LayerKind kind = parse_layer_kind(flags.model);
  Index width = input_width;
  for (int l = 0; l < flags.layers; ++l) {
    LayerSpecEntry e{kind, flags.units};
    e.activation = Activation::tanh;
    e.output_activation = Activation::tanh;
    if (is_quaternion_kind(kind) && width % 4 != 0)
      throw ConfigError("input width " + std::to_string(width) +
                        " is not a multiple of 4; quaternion layers need 4-real bundles");
    spec.layers.push_back(e);
    width = is_quaternion_kind(kind) ? static_cast<Index>(flags.units) * 4
                                     : static_cast<Index>(flags.units);
  }
  spec.layers.push_back({LayerKind::dense, static_cast<int>(head_width), Activation::identity});
  spec.dropout = flags.dropout;
  return spec;
}

inline void write_metrics_csv(const fs::path& path, const RunMetrics& metrics) {
  std::ofstream out(path);
  out << "epoch,split,loss,metric,lr\n";
  for (const EpochRecord& e : metrics.epochs) {
    out << e.epoch << ",train," << format_double(e.train_loss) << ",,"
        << format_double(e.lr) << "\n";
    out << e.epoch << ",val," << format_double(e.val_loss) << ","
        << format_double(e.metric) << "," << format_double(e.lr) << "\n";
  }
}

// Dataset directory layout written by gen-task: manifest.txt plus
// train/ and val/ with one QFT1 file per sequence; dense targets live in
// targets.csv (sequence id, column-major values).

inline void write_dataset_dir(const fs::path& dir, const Dataset& ds) {
  fs::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt");
  manifest << "task = " << to_string(ds.spec.kind) << "\n";
  manifest << "seq_len = " << ds.spec.seq_len << "\n";
  manifest << "width = " << ds.spec.width << "\n";
  manifest << "train_count = " << ds.spec.train_count << "\n";
  manifest << "val_count = " << ds.spec.val_count << "\n";
  manifest << "seed = " << ds.spec.seed << "\n";

  auto write_split = [&](const std::string& name, const std::vector<Sample>& pool) {
    fs::create_directories(dir / name);
    std::ofstream targets(dir / name / "targets.csv");
    targets << "seq,values\n";
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const Sample& s = pool[i];
      QuaternionSequence seq;
      seq.frames = from_real<QuaternionAlgebra>(s.inputs);
      if (!s.class_target.empty()) seq.labels = s.class_target;
      char name_buf[32];
      std::snprintf(name_buf, sizeof name_buf, "seq%05zu.qft", i);
      write_features((dir / name / name_buf).string(), seq);
      if (s.dense_target.size() > 0) {
        targets << i;
        for (Index c = 0; c < s.dense_target.cols(); ++c)
          for (Index r = 0; r < s.dense_target.rows(); ++r)
            targets << "," << format_double(s.dense_target(r, c));
        targets << "\n";
      }
    }
  };
  write_split("train", ds.train);
  write_split("val", ds.val);
}

inline std::string manifest_value(const fs::path& manifest, const std::string& key) {
  std::ifstream in(manifest);
  if (!in) throw IoError("dataset manifest not found: " + manifest.string());
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto strip = [](std::string s) {
      s.erase(s.find_last_not_of(" \t\r") + 1);
      s.erase(0, s.find_first_not_of(" \t\r"));
      return s;
    };
    if (strip(line.substr(0, eq)) == key) return strip(line.substr(eq + 1));
  }
  throw IoError("dataset manifest missing key: " + key);
}

inline Dataset read_dataset_dir(const fs::path& dir) {
  TaskSpec spec;
  spec.kind = parse_task(manifest_value(dir / "manifest.txt", "task"));
  spec.seq_len = std::stoi(manifest_value(dir / "manifest.txt", "seq_len"));
  spec.width = std::stoi(manifest_value(dir / "manifest.txt", "width"));
  spec.train_count = std::stoi(manifest_value(dir / "manifest.txt", "train_count"));
  spec.val_count = std::stoi(manifest_value(dir / "manifest.txt", "val_count"));
  spec.seed = std::stoull(manifest_value(dir / "manifest.txt", "seed"));

  Dataset skeleton = gen_task(
      TaskSpec{spec.kind, spec.seq_len, spec.width, 1, 1, spec.seed});  // shape metadata only
  Dataset ds;
  ds.spec = spec;
  ds.loss = skeleton.loss;
  ds.final_step_only = skeleton.final_step_only;
  ds.target_width = skeleton.target_width;

  auto read_split = [&](const std::string& name, int count, std::vector<Sample>& pool) {
    std::vector<std::vector<double>> dense(static_cast<std::size_t>(count));
    std::ifstream targets(dir / name / "targets.csv");
    if (targets) {
      std::string line;
      std::getline(targets, line);  // header
      while (std::getline(targets, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::getline(row, cell, ',');
        const auto id = static_cast<std::size_t>(std::stoul(cell));
        while (std::getline(row, cell, ',')) dense.at(id).push_back(std::stod(cell));
      }
    }
    for (int i = 0; i < count; ++i) {
      char name_buf[32];
      std::snprintf(name_buf, sizeof name_buf, "seq%05d.qft", i);
      const QuaternionSequence seq = read_features((dir / name / name_buf).string());
      Sample s;
      s.inputs = to_real(seq.frames);
      s.class_target = seq.labels;
      const auto& d = dense[static_cast<std::size_t>(i)];
      if (!d.empty()) {
        const auto rows = static_cast<Index>(ds.target_width);
        const auto cols = static_cast<Index>(d.size()) / rows;
        s.dense_target = Mat::Zero(rows, cols);
        for (Index c = 0; c < cols; ++c)
          for (Index r = 0; r < rows; ++r)
            s.dense_target(r, c) = d[static_cast<std::size_t>(c * rows + r)];
      }
      pool.push_back(std::move(s));
    }
  };
  read_split("train", spec.train_count, ds.train);
  read_split("val", spec.val_count, ds.val);
  ds.input_width = ds.train.front().inputs.rows();
  return ds;
}

inline void print_gradcheck_report(std::ostream& os, const GradCheckReport& rep) {
  os << "gradient check: analytic backpropagation vs central finite differences\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-22s %14s %14s %22s\n", "parameter", "max rel err",
                "mean rel err", "worst coordinate");
  os << line;
  for (const ParamCheck& p : rep.params) {
    std::snprintf(line, sizeof line, "%-22s %14.3e %14.3e   comp %d (%ld,%ld)\n",
                  p.name.c_str(), p.max_rel_error, p.mean_rel_error, p.worst_component,
                  static_cast<long>(p.worst_row), static_cast<long>(p.worst_col));
    os << line;
  }
  os << "max relative error: " << format_double(rep.max_rel_error)
     << "  tolerance: " << format_double(rep.tolerance) << "\n";
  if (rep.relu_present)
    os << "relu kink proximity: " << format_double(rep.relu_kink_proximity)
       << " (finite differences are unreliable near a kink)\n";
  os << "result: " << (rep.pass ? "PASS" : "FAIL") << "\n";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommand implementations

struct CommonFlags {
  std::uint64_t seed = 0;
  std::string out = "runs";
  std::string run_name;
};

inline int run_train(const CommonFlags& common, const detail::ModelFlags& model_flags,
                     const std::string& task, int seq_len, int width, int train_count,
                     int val_count, const std::string& features_dir, TrainConfig cfg,
                     int folds, const std::string& fold_reseed, const CLI::App& cmd) {
  Dataset ds;
  if (!features_dir.empty()) {
    ds = detail::read_dataset_dir(features_dir);
  } else {
    TaskSpec tspec;
    tspec.kind = parse_task(task);
    tspec.seq_len = seq_len;
    tspec.width = width;
    tspec.train_count = train_count;
    tspec.val_count = val_count;
    tspec.seed = common.seed;
    ds = gen_task(tspec);
  }
  cfg.loss = ds.loss;

  const fs::path run_dir =
      detail::make_run_dir(common.out, "train", common.seed, common.run_name);
  detail::write_effective_config(cmd, run_dir);

  const ModelSpec mspec =
      detail::model_spec_for(model_flags, ds.input_width, ds.target_width);

  nlohmann::json summary;
  summary["task"] = features_dir.empty() ? task : "features:" + features_dir;
  summary["model"] = model_flags.model;
  summary["params"] = param_count(mspec).total();
  summary["folds"] = nlohmann::json::array();

  double best_overall = std::numeric_limits<double>::infinity();
  for (int fold = 0; fold < folds; ++fold) {
    std::uint64_t weight_seed = model_flags.seed;
    TrainConfig fold_cfg = cfg;
    Dataset* fold_ds = &ds;
    Dataset reseeded;
    if (fold > 0) {
      Rng fold_rng(common.seed + 7700 + static_cast<std::uint64_t>(fold));
      const std::uint64_t fresh = fold_rng.next_u64();
      if (fold_reseed == "weights" || fold_reseed == "both") weight_seed = fresh;
      if (fold_reseed == "data" || fold_reseed == "both") {
        fold_cfg.seed = fresh + 1;
        if (features_dir.empty()) {
          TaskSpec tspec = ds.spec;
          tspec.seed = fresh + 2;
          reseeded = gen_task(tspec);
          fold_ds = &reseeded;
        }
      }
    }

    const fs::path fold_dir = folds > 1 ? run_dir / ("fold" + std::to_string(fold)) : run_dir;
    fs::create_directories(fold_dir);

    TrainResult result = train(build_model(mspec, weight_seed), *fold_ds, fold_cfg);
    detail::write_metrics_csv(fold_dir / "metrics.csv", result.metrics);
    save_model((fold_dir / "best.qnn1").string(), result.best_model);
    save_model((fold_dir / "final.qnn1").string(), result.model);

    nlohmann::json fold_summary;
    fold_summary["fold"] = fold;
    fold_summary["best_epoch"] = result.metrics.best_epoch;
    fold_summary["best_val_loss"] = result.metrics.best_val_loss;
    fold_summary["total_seconds"] = result.metrics.total_seconds;
    nlohmann::json secs = nlohmann::json::array();
    for (const EpochRecord& e : result.metrics.epochs) secs.push_back(e.seconds);
    fold_summary["epoch_seconds"] = secs;
    summary["folds"].push_back(fold_summary);
    best_overall = std::min(best_overall, result.metrics.best_val_loss);

    std::cout << "fold " << fold << ": best val loss "
              << detail::format_double(result.metrics.best_val_loss) << " at epoch "
              << result.metrics.best_epoch << "\n";
  }
  summary["best_val_loss"] = best_overall;
  std::ofstream(run_dir / "summary.json") << summary.dump(2) << "\n";
  std::cout << "run directory: " << run_dir.string() << "\n";
  return kExitOk;
}

inline int run_eval(const CommonFlags& common, const std::string& checkpoint,
                    const std::string& task, int seq_len, int width, int val_count,
                    const std::string& features_dir, const CLI::App& cmd) {
  Dataset ds;
  if (!features_dir.empty()) {
    ds = detail::read_dataset_dir(features_dir);
  } else {
    TaskSpec tspec;
    tspec.kind = parse_task(task);
    tspec.seq_len = seq_len;
    tspec.width = width;
    tspec.train_count = 1;
    tspec.val_count = val_count;
    tspec.seed = common.seed;
    ds = gen_task(tspec);
  }
  Model model = load_model(checkpoint);

  const fs::path run_dir = detail::make_run_dir(common.out, "eval", common.seed, common.run_name);
  detail::write_effective_config(cmd, run_dir);

  const auto [loss, metric] = qnn::detail::evaluate(model, ds, ds.val, 8);
  std::ofstream out(run_dir / "eval.txt");
  out << "loss = " << detail::format_double(loss) << "\n";
  out << "metric = " << detail::format_double(metric) << "\n";
  std::cout << "loss " << detail::format_double(loss) << "  metric "
            << detail::format_double(metric) << "\n";
  return std::isfinite(loss) ? kExitOk : kExitValidation;
}

inline int run_gradcheck(const CommonFlags& common, const detail::ModelFlags& model_flags,
                         int seq_len, double tol, const std::string& loss_name, int batch,
                         bool write_csv, const CLI::App& cmd) {
  const LayerKind kind = parse_layer_kind(model_flags.model);
  const LossKind loss = parse_loss(loss_name);

  ModelSpec spec;
  spec.input_width = 8;
  for (int l = 0; l < model_flags.layers; ++l) {
    LayerSpecEntry e{kind, model_flags.units};
    e.activation = Activation::tanh;
    e.output_activation = Activation::tanh;
    spec.layers.push_back(e);
  }
  Model model = build_model(spec, common.seed == 0 ? 1 : common.seed);

  Rng rng(common.seed * 1315423911ull + 17);
  Batch batch_data;
  batch_data.loss = loss;
  batch_data.inputs.clear();
  for (int t = 0; t < seq_len; ++t) {
    Mat m(8, batch);
    for (Index j = 0; j < batch; ++j)
      for (Index i = 0; i < 8; ++i) m(i, j) = rng.uniform(-1.0, 1.0);
    batch_data.inputs.push_back(std::move(m));
  }
  if (loss == LossKind::mse) {
    // Targets near the outputs keep every coordinate resolvable by the
    // finite-difference probe (the loss scale bounds the FD noise).
    const SeqMat out = model.forward(batch_data.inputs, nullptr);
    for (const Mat& o : out) {
      Mat noise(o.rows(), o.cols());
      for (Index j = 0; j < o.cols(); ++j)
        for (Index i = 0; i < o.rows(); ++i) noise(i, j) = rng.uniform(-8e-4, 8e-4);
      batch_data.target.dense.push_back(o + noise);
    }
  } else {
    const auto classes = static_cast<std::uint64_t>(model.output_real_width());
    for (int t = 0; t < seq_len; ++t) {
      Eigen::VectorXi cls(batch);
      for (Index j = 0; j < batch; ++j)
        cls(j) = static_cast<int>(rng.uniform_index(classes));
      batch_data.target.classes.push_back(cls);
    }
  }

  GradCheckReport rep = grad_check(model, batch_data, tol);
  // Resample away from relu kinks, as the report advises.
  for (int attempt = 0; attempt < 16 && rep.relu_present && rep.relu_kink_proximity < 1e-3;
       ++attempt) {
    for (Mat& m : batch_data.inputs)
      for (Index j = 0; j < m.cols(); ++j)
        for (Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-1.0, 1.0);
    rep = grad_check(model, batch_data, tol);
  }

  const fs::path run_dir =
      detail::make_run_dir(common.out, "gradcheck", common.seed, common.run_name);
  detail::write_effective_config(cmd, run_dir);
  {
    std::ofstream out(run_dir / "gradcheck.txt");
    detail::print_gradcheck_report(out, rep);
  }
  detail::print_gradcheck_report(std::cout, rep);
  if (write_csv) {
    std::ofstream csv(run_dir / "gradcheck.csv");
    csv << "parameter,max_rel_error,mean_rel_error,worst_component,worst_row,worst_col\n";
    for (const ParamCheck& p : rep.params)
      csv << p.name << "," << detail::format_double(p.max_rel_error) << ","
          << detail::format_double(p.mean_rel_error) << "," << p.worst_component << ","
          << p.worst_row << "," << p.worst_col << "\n";
  }
  return rep.pass ? kExitOk : kExitValidation;
}

inline int run_init_stats(const CommonFlags& common, const std::string& criterion, int n_in,
                          int n_out, int samples, const std::string& magnitudes_csv,
                          const CLI::App& cmd) {
  InitConfig cfg;
  cfg.criterion = parse_criterion(criterion);
  cfg.n_in = n_in;
  cfg.n_out = n_out;
  cfg.seed = common.seed;
  const InitAuditReport rep = audit_init(cfg, static_cast<std::size_t>(samples));

  const fs::path run_dir =
      detail::make_run_dir(common.out, "init-stats", common.seed, common.run_name);
  detail::write_effective_config(cmd, run_dir);

  std::ostringstream block;
  auto kv = [&](const std::string& k, const std::string& v) { block << k << " = " << v << "\n"; };
  kv("criterion", std::string(to_string(rep.criterion)));
  kv("n_in", std::to_string(rep.n_in));
  kv("n_out", std::to_string(rep.n_out));
  kv("sigma", detail::format_double(rep.sigma));
  kv("sample_count", std::to_string(rep.sample_count));
  kv("var_magnitude", detail::format_double(rep.var_magnitude));
  kv("centered_var_magnitude", detail::format_double(rep.centered_var_magnitude));
  kv("expected_var_paper_4sigma2", detail::format_double(rep.expected_var));
  kv("construction_var_sigma2_over_3", detail::format_double(rep.construction_var));
  kv("chi4_synthetic_var", detail::format_double(rep.chi4_synthetic_var));
  kv("variance_targets_disagree", rep.variance_targets_disagree ? "true" : "false");
  kv("max_abs_magnitude_minus_phi", detail::format_double(rep.max_abs_magnitude_minus_phi));
  kv("max_magnitude", detail::format_double(rep.max_magnitude));
  for (int c = 0; c < 4; ++c) {
    kv("component_mean_" + std::string(1, "rijk"[c]), detail::format_double(rep.component_mean[c]));
    kv("component_stderr_" + std::string(1, "rijk"[c]),
       detail::format_double(rep.component_stderr[c]));
  }
  kv("theta_uniformity_pvalue", detail::format_double(rep.theta_uniformity_pvalue));
  kv("magnitude_uniformity_pvalue", detail::format_double(rep.magnitude_uniformity_pvalue));

  std::cout << block.str();
  std::ofstream(run_dir / "report.txt") << block.str();
  if (!magnitudes_csv.empty()) {
    std::ofstream csv(magnitudes_csv);
    csv << "magnitude\n";
    for (double m : rep.magnitudes) csv << detail::format_double(m) << "\n";
  }
  return kExitOk;
}

inline int run_bench(const CommonFlags& common, double duration, const CLI::App& cmd) {
  const fs::path run_dir = detail::make_run_dir(common.out, "bench", common.seed, common.run_name);
  detail::write_effective_config(cmd, run_dir);

  std::vector<BenchConfig> configs;
  for (int width : {64, 256}) {
    BenchConfig dense{LayerKind::dense, LayerKind::qdense, width, 8, 8, duration, common.seed};
    BenchConfig rnn{LayerKind::rnn, LayerKind::qrnn, width, 16, 8, duration, common.seed};
    BenchConfig lstm{LayerKind::lstm, LayerKind::qlstm, width, 16, 8, duration, common.seed};
    configs.push_back(dense);
    configs.push_back(rnn);
    configs.push_back(lstm);
  }

  std::ofstream csv(run_dir / "bench.csv");
  csv << "config,real_params,quat_params,param_ratio,ops_real,ops_quat,"
         "fwd_real_sps,fwd_quat_sps,bwd_real_sps,bwd_quat_sps,slowdown_fwd,slowdown_bwd\n";
  std::printf("%-28s %9s %9s %6s %9s %9s %7s\n", "config", "real#", "quat#", "ratio",
              "fwd q/s", "bwd q/s", "slow");
  for (const BenchConfig& cfg : configs) {
    const BenchRow row = throughput_bench(cfg);
    csv << row.config << "," << row.real_params << "," << row.quat_params << ","
        << detail::format_double(row.param_ratio) << "," << row.ops_real << "," << row.ops_quat
        << "," << detail::format_double(row.fwd_real_sps) << ","
        << detail::format_double(row.fwd_quat_sps) << ","
        << detail::format_double(row.bwd_real_sps) << ","
        << detail::format_double(row.bwd_quat_sps) << ","
        << detail::format_double(row.slowdown_fwd) << ","
        << detail::format_double(row.slowdown_bwd) << "\n";
    std::printf("%-28s %9lld %9lld %6.2f %9.1f %9.1f %7.2f\n", row.config.c_str(),
                static_cast<long long>(row.real_params), static_cast<long long>(row.quat_params),
                row.param_ratio, row.fwd_quat_sps, row.bwd_quat_sps, row.slowdown_bwd);
    if (row.slowdown_bwd > 3.0)
      std::printf("  note: slowdown %.2fx exceeds the 3x reference point\n", row.slowdown_bwd);
  }
  std::cout << "bench csv: " << (run_dir / "bench.csv").string() << "\n";
  return kExitOk;
}

inline int run_features(const std::string& from_csv, const std::string& out_file,
                        const std::string& inspect) {
  if (!inspect.empty()) {
    const QuaternionSequence seq = read_features(inspect);
    std::cout << "features = " << seq.features() << "\n";
    std::cout << "frames = " << seq.steps() << "\n";
    std::cout << "labelled = " << (seq.labels.empty() ? "no" : "yes") << "\n";
    return kExitOk;
  }
  const EnergyMatrix energy = read_energy_csv(from_csv);
  const QuaternionSequence seq = assemble_quaternions(energy);
  write_features(out_file, seq);
  std::cout << "wrote " << out_file << " (" << seq.features() << " quaternion features x "
            << seq.steps() << " frames)\n";
  return kExitOk;
}

inline int run_gen_task(const CommonFlags& common, const std::string& task, int seq_len,
                        int width, int train_count, int val_count, const CLI::App& cmd) {
  TaskSpec spec;
  spec.kind = parse_task(task);
  spec.seq_len = seq_len;
  spec.width = width;
  spec.train_count = train_count;
  spec.val_count = val_count;
  spec.seed = common.seed;
  const Dataset ds = gen_task(spec);

  const fs::path run_dir =
      detail::make_run_dir(common.out, "gen-task", common.seed, common.run_name);
  detail::write_effective_config(cmd, run_dir);
  detail::write_dataset_dir(run_dir / "dataset", ds);
  std::cout << "dataset directory: " << (run_dir / "dataset").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, char** argv) {
  CLI::App app{"quaternion recurrent neural network workbench"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key = value configuration file with sections");

  CommonFlags common;
  detail::ModelFlags model_flags;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", common.seed, "root seed; all randomness derives from it");
    cmd->add_option("--out", common.out, "parent directory for run outputs");
    cmd->add_option("--run-name", common.run_name, "fixed run directory name");
  };
  auto add_model = [&](CLI::App* cmd) {
    cmd->add_option("--model", model_flags.model, "rnn, lstm, qrnn or qlstm")
        ->check(CLI::IsMember({"rnn", "lstm", "qrnn", "qlstm"}));
    cmd->add_option("--units", model_flags.units, "hidden units (quaternion units for q-models)");
    cmd->add_option("--layers", model_flags.layers, "stacked recurrent layers");
  };

  // train
  std::string task = "adding", features_dir;
  int seq_len = 30, width = 8, train_count = 1024, val_count = 256, folds = 1;
  std::string fold_reseed = "both";
  TrainConfig tcfg;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model on a task or feature set");
  add_common(train_cmd);
  add_model(train_cmd);
  train_cmd->add_option("--task", task, "adding, copy or identity")
      ->check(CLI::IsMember({"adding", "copy", "identity"}));
  train_cmd->add_option("--features", features_dir, "dataset directory from gen-task");
  train_cmd->add_option("--seq-len", seq_len, "sequence length");
  train_cmd->add_option("--width", width, "task feature width / vocabulary");
  train_cmd->add_option("--train-count", train_count, "training sequences");
  train_cmd->add_option("--val-count", val_count, "validation sequences");
  train_cmd->add_option("--epochs", tcfg.epochs, "training epochs");
  train_cmd->add_option("--lr", tcfg.initial_lr, "initial learning rate");
  train_cmd->add_option("--dropout", model_flags.dropout, "dropout rate on hidden layers");
  train_cmd->add_option("--batch", tcfg.batch_size, "sequences per batch");
  train_cmd->add_option("--patience", tcfg.patience, "epochs without improvement before halving");
  train_cmd->add_option("--anneal-factor", tcfg.anneal_factor, "learning-rate multiplier on stall");
  train_cmd->add_option("--clip-norm", tcfg.clip_norm, "global gradient-norm clip (0 = off)");
  train_cmd->add_option("--folds", folds, "independent repetitions");
  train_cmd->add_option("--fold-reseed", fold_reseed, "what changes across folds")
      ->check(CLI::IsMember({"weights", "data", "both"}));

  // eval
  std::string checkpoint;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd);
  eval_cmd->add_option("--checkpoint", checkpoint, "QNN1 checkpoint path")->required();
  eval_cmd->add_option("--task", task, "adding, copy or identity");
  eval_cmd->add_option("--features", features_dir, "dataset directory from gen-task");
  eval_cmd->add_option("--seq-len", seq_len, "sequence length");
  eval_cmd->add_option("--width", width, "task feature width / vocabulary");
  eval_cmd->add_option("--val-count", val_count, "validation sequences");

  // gradcheck
  double tol = 1e-5;
  std::string loss_name = "mse";
  int gc_batch = 2;
  bool gc_csv = false;
  CLI::App* gc_cmd = app.add_subcommand("gradcheck", "verify backprop against finite differences");
  add_common(gc_cmd);
  add_model(gc_cmd);
  gc_cmd->add_option("--seq-len", seq_len, "sequence length");
  gc_cmd->add_option("--tol", tol, "max relative error tolerance");
  gc_cmd->add_option("--loss", loss_name, "mse or nll")->check(CLI::IsMember({"mse", "nll"}));
  gc_cmd->add_option("--batch", gc_batch, "batch size");
  gc_cmd->add_flag("--csv", gc_csv, "also write per-parameter errors as csv");

  // init-stats
  std::string criterion = "glorot", magnitudes_csv;
  int n_in = 256, n_out = 256, samples = 100000;
  CLI::App* init_cmd = app.add_subcommand("init-stats", "audit the weight initialization");
  add_common(init_cmd);
  init_cmd->add_option("--criterion", criterion, "glorot or he")
      ->check(CLI::IsMember({"glorot", "he"}));
  init_cmd->add_option("--n-in", n_in, "fan-in (quaternion units)");
  init_cmd->add_option("--n-out", n_out, "fan-out (quaternion units)");
  init_cmd->add_option("--samples", samples, "sample count (>= 10000)");
  init_cmd->add_option("--magnitudes-csv", magnitudes_csv, "write sampled |w| values here");

  // bench
  double duration = 0.5;
  CLI::App* bench_cmd = app.add_subcommand("bench", "throughput and parameter-count benchmark");
  add_common(bench_cmd);
  bench_cmd->add_option("--duration", duration, "seconds per measurement");

  // features
  std::string from_csv, out_file, inspect;
  CLI::App* feat_cmd = app.add_subcommand("features", "assemble or inspect feature files");
  feat_cmd->add_option("--from-csv", from_csv, "energy csv (header t,f,e)");
  feat_cmd->add_option("--out-file", out_file, "output QFT1 path");
  feat_cmd->add_option("--inspect", inspect, "print the header of a QFT1 file");

  // gen-task
  CLI::App* gen_cmd = app.add_subcommand("gen-task", "write a synthetic dataset to disk");
  add_common(gen_cmd);
  gen_cmd->add_option("--task", task, "adding, copy or identity")
      ->check(CLI::IsMember({"adding", "copy", "identity"}));
  gen_cmd->add_option("--seq-len", seq_len, "sequence length");
  gen_cmd->add_option("--width", width, "task feature width / vocabulary");
  gen_cmd->add_option("--train-count", train_count, "training sequences");
  gen_cmd->add_option("--val-count", val_count, "validation sequences");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    model_flags.seed = common.seed + 1;  // weights draw from their own stream
    tcfg.seed = common.seed;
    tcfg.dropout = model_flags.dropout;
    if (train_cmd->parsed())
      return run_train(common, model_flags, task, seq_len, width, train_count, val_count,
                       features_dir, tcfg, folds, fold_reseed, *train_cmd);
    if (eval_cmd->parsed())
      return run_eval(common, checkpoint, task, seq_len, width, val_count, features_dir,
                      *eval_cmd);
    if (gc_cmd->parsed())
      return run_gradcheck(common, model_flags, seq_len, tol, loss_name, gc_batch, gc_csv,
                           *gc_cmd);
    if (init_cmd->parsed())
      return run_init_stats(common, criterion, n_in, n_out, samples, magnitudes_csv, *init_cmd);
    if (bench_cmd->parsed()) return run_bench(common, duration, *bench_cmd);
    if (feat_cmd->parsed()) {
      if (inspect.empty() && (from_csv.empty() || out_file.empty())) {
        std::cerr << "features: provide --inspect or both --from-csv and --out-file\n";
        return kExitUsage;
      }
      return run_features(from_csv, out_file, inspect);
    }
    if (gen_cmd->parsed())
      return run_gen_task(common, task, seq_len, width, train_count, val_count, *gen_cmd);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UnknownIdError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}

}  // namespace qnn::cli
