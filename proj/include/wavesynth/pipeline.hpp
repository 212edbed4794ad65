#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "wavesynth/csv_io.hpp"
#include "wavesynth/error.hpp"
#include "wavesynth/metrics.hpp"
#include "wavesynth/patch_synth.hpp"
#include "wavesynth/processes.hpp"
#include "wavesynth/random.hpp"
#include "wavesynth/version.hpp"
#include "wavesynth/wavelet.hpp"

namespace wavesynth {

enum class Mode { Reshuffle, Retarget2x };

/// How the 2x-long ground truth relates to the training grid.
enum class RetargetGroundTruth {
  ExtendHorizon,  // same dt, horizon stretched to cover the extra samples
  RefineGrid,     // same horizon, half-size dt
};

NLOHMANN_JSON_SERIALIZE_ENUM(Mode, {{Mode::Reshuffle, "Reshuffle"}, {Mode::Retarget2x, "Retarget2x"}})
NLOHMANN_JSON_SERIALIZE_ENUM(RetargetGroundTruth, {{RetargetGroundTruth::ExtendHorizon, "ExtendHorizon"},
                                                   {RetargetGroundTruth::RefineGrid, "RefineGrid"}})
NLOHMANN_JSON_SERIALIZE_ENUM(ProcessKind, {{ProcessKind::WienerProcess, "WienerProcess"},
                                           {ProcessKind::BrownianBridge, "BrownianBridge"},
                                           {ProcessKind::DriftedBrownianMotion, "DriftedBrownianMotion"}})

inline std::string_view to_string(Mode mode) { return mode == Mode::Reshuffle ? "Reshuffle" : "Retarget2x"; }

inline std::optional<Mode> parse_mode(std::string_view name) {
  if (name == "Reshuffle" || name == "reshuffle") return Mode::Reshuffle;
  if (name == "Retarget2x" || name == "retarget") return Mode::Retarget2x;
  return std::nullopt;
}

struct ExperimentConfig {
  ProcessSpec process;
  int n_train = 5;
  int total_synthetic = 5000;
  Mode mode = Mode::Reshuffle;
  int ground_truth_count = 5000;
  int length = 256;
  WaveletConfig wavelet;
  SynthConfig synth;
  int k = 3;
  std::uint64_t base_seed = 0;
  std::filesystem::path out_dir = "out";
  RetargetGroundTruth retarget_ground_truth = RetargetGroundTruth::ExtendHorizon;
  unsigned threads = 0;  // 0 = hardware concurrency; does not affect results

  double retarget_factor() const noexcept { return mode == Mode::Retarget2x ? 2.0 : 1.0; }

  int output_length() const { return static_cast<int>(std::lround(length * retarget_factor())); }

  /// Synthesis settings with the mode's retarget factor applied.
  SynthConfig effective_synth() const {
    SynthConfig s = synth;
    s.retarget_factor = retarget_factor();
    return s;
  }

  ProcessSpec ground_truth_process() const {
    ProcessSpec spec = process;
    if (mode == Mode::Retarget2x && retarget_ground_truth == RetargetGroundTruth::ExtendHorizon) {
      spec.horizon = process.horizon * static_cast<double>(output_length() - 1) / static_cast<double>(length - 1);
    }
    return spec;
  }

  /// Shrinks both the ground-truth and synthetic budgets by `factor`.
  void apply_scale(double factor) {
    detail::require(std::isfinite(factor) && factor > 0.0 && factor <= 1.0, ErrorKind::Parameter,
                    "scale must lie in (0, 1]");
    ground_truth_count = std::max(1, static_cast<int>(std::lround(ground_truth_count * factor)));
    total_synthetic = std::max(1, static_cast<int>(std::lround(total_synthetic * factor)));
  }

  void validate() const {
    process.validate();
    wavelet.validate();
    effective_synth().validate();
    detail::require(n_train >= 1, ErrorKind::Parameter, "n_train must be positive");
    detail::require(total_synthetic >= 1, ErrorKind::Parameter, "total_synthetic must be positive");
    detail::require(ground_truth_count >= 1, ErrorKind::Parameter, "ground_truth_count must be positive");
    detail::require(length >= 2, ErrorKind::Parameter, "length must be at least 2");
    detail::require(k >= 1, ErrorKind::Parameter, "k must be positive");
  }
};

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::json& j, const ProcessSpec& p) {
  j = {{"kind", p.kind}, {"drift", p.drift}, {"volatility", p.volatility}, {"terminal", p.terminal}, {"horizon", p.horizon}};
}

inline void from_json(const nlohmann::json& j, ProcessSpec& p) {
  p.kind = j.value("kind", p.kind);
  p.drift = j.value("drift", p.drift);
  p.volatility = j.value("volatility", p.volatility);
  p.terminal = j.value("terminal", p.terminal);
  p.horizon = j.value("horizon", p.horizon);
}

inline void to_json(nlohmann::json& j, const WaveletConfig& w) {
  j = {{"omega0", w.omega0}, {"scales", w.scales}, {"kernel_truncation", w.kernel_truncation}, {"ridge", w.ridge}};
}

inline void from_json(const nlohmann::json& j, WaveletConfig& w) {
  w.omega0 = j.value("omega0", w.omega0);
  w.scales = j.value("scales", w.scales);
  w.kernel_truncation = j.value("kernel_truncation", w.kernel_truncation);
  w.ridge = j.value("ridge", w.ridge);
}

inline void to_json(nlohmann::json& j, const SynthConfig& s) {
  j = {{"patch_size", s.patch_size},
       {"stride", s.stride},
       {"pyramid_ratio", s.pyramid_ratio},
       {"min_width", s.min_width},
       {"num_projections", s.num_projections},
       {"steps_per_level", s.steps_per_level},
       {"noise_sigma", s.noise_sigma},
       {"retarget_factor", s.retarget_factor}};
}

inline void from_json(const nlohmann::json& j, SynthConfig& s) {
  s.patch_size = j.value("patch_size", s.patch_size);
  s.stride = j.value("stride", s.stride);
  s.pyramid_ratio = j.value("pyramid_ratio", s.pyramid_ratio);
  s.min_width = j.value("min_width", s.min_width);
  s.num_projections = j.value("num_projections", s.num_projections);
  s.steps_per_level = j.value("steps_per_level", s.steps_per_level);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  s.retarget_factor = j.value("retarget_factor", s.retarget_factor);
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"process", c.process},
       {"n_train", c.n_train},
       {"total_synthetic", c.total_synthetic},
       {"mode", c.mode},
       {"ground_truth_count", c.ground_truth_count},
       {"length", c.length},
       {"wavelet", c.wavelet},
       {"synth", c.synth},
       {"k", c.k},
       {"base_seed", c.base_seed},
       {"out_dir", c.out_dir.generic_string()},
       {"retarget_ground_truth", c.retarget_ground_truth}};
}

/// Missing fields keep their defaults. A run manifest is accepted too: its
/// `config` member is used.
inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  const nlohmann::json& src = j.contains("config") && j.at("config").is_object() ? j.at("config") : j;
  if (src.contains("process")) c.process = src.at("process").get<ProcessSpec>();
  c.n_train = src.value("n_train", c.n_train);
  c.total_synthetic = src.value("total_synthetic", c.total_synthetic);
  c.mode = src.value("mode", c.mode);
  c.ground_truth_count = src.value("ground_truth_count", c.ground_truth_count);
  c.length = src.value("length", c.length);
  if (src.contains("wavelet")) c.wavelet = src.at("wavelet").get<WaveletConfig>();
  if (src.contains("synth")) c.synth = src.at("synth").get<SynthConfig>();
  c.k = src.value("k", c.k);
  c.base_seed = src.value("base_seed", c.base_seed);
  if (src.contains("out_dir")) c.out_dir = src.at("out_dir").get<std::string>();
  c.retarget_ground_truth = src.value("retarget_ground_truth", c.retarget_ground_truth);
}

// ---------------------------------------------------------------------------
// Seed tree and budget

/// base_seed -> training (0), ground truth (1), synthesis root (2);
/// synthesis job (i, r) = derive_seed(synthesis root, i, r).
struct SeedTree {
  std::uint64_t training;
  std::uint64_t ground_truth;
  std::uint64_t synthesis;

  explicit SeedTree(std::uint64_t base)
      : training(derive_seed(base, 0)), ground_truth(derive_seed(base, 1)), synthesis(derive_seed(base, 2)) {}

  std::uint64_t job(std::size_t training_index, std::size_t replica) const {
    return derive_seed(synthesis, training_index, replica);
  }
};

/// Synthetic samples per training series. Sums to `total` exactly; when
/// `total` is not a multiple of `n`, the first total % n series get one extra.
inline std::vector<int> allocate_budget(int total, int n) {
  std::vector<int> counts(static_cast<std::size_t>(n), total / n);
  for (int i = 0; i < total % n; ++i) ++counts[static_cast<std::size_t>(i)];
  return counts;
}

// ---------------------------------------------------------------------------
// Experiment

struct ExperimentResult {
  EvalReport report;
  nlohmann::json manifest;
  Dataset training;
  Dataset ground_truth;
  Dataset synthetic;
};

inline std::string report_header() { return "process,n_train,mode,precision,recall,k,m_real,m_fake,seed"; }

inline std::string report_row(const ExperimentConfig& cfg, const EvalReport& r) {
  std::ostringstream os;
  os << to_string(cfg.process.kind) << ',' << cfg.n_train << ',' << to_string(cfg.mode) << ','
     << io::format_double(r.precision) << ',' << io::format_double(r.recall) << ',' << r.k << ',' << r.m_real << ','
     << r.m_fake << ',' << cfg.base_seed;
  return os.str();
}

namespace detail {

/// Runs fn(i) for i in [0, count) on a bounded pool. Results must be written
/// to per-index slots so the schedule cannot influence them.
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

class ManifestWriter {
 public:
  ManifestWriter(std::filesystem::path dir, nlohmann::json manifest) : dir_(std::move(dir)), manifest_(std::move(manifest)) {
    manifest_["files"] = nlohmann::json::array();
    manifest_["timings_s"] = nlohmann::json::object();
  }

  nlohmann::json& json() { return manifest_; }

  template <class WriteFn>
  void write_file(const std::filesystem::path& relative, WriteFn&& fn) {
    {
      auto os = io::open_output(dir_ / relative);
      fn(os);
      if (!os) throw Error(ErrorKind::Io, "failed writing '" + (dir_ / relative).string() + "'");
    }
    manifest_["files"].push_back(relative.generic_string());
  }

  void time(const std::string& stage, double seconds) { manifest_["timings_s"][stage] = seconds; }

  void flush() const {
    std::filesystem::create_directories(dir_);
    nlohmann::json out = manifest_;
    out["files"].push_back("manifest.json");
    std::ofstream os(dir_ / "manifest.json", std::ios::binary);
    os << out.dump(2) << '\n';
    if (!os) throw Error(ErrorKind::Io, "failed writing manifest");
  }

 private:
  std::filesystem::path dir_;
  nlohmann::json manifest_;
};

inline void write_overlay(std::ostream& os, const Dataset& ds, std::size_t max_series, bool with_id) {
  os << (with_id ? "series,t,value\n" : "t,value\n");
  const std::size_t count = std::min(max_series, ds.size());
  for (std::size_t s = 0; s < count; ++s) {
    const auto& ts = ds.series[s];
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (with_id) os << s << ',';
      os << io::format_double(ts.time(i)) << ',' << io::format_double(ts[i]) << '\n';
    }
  }
}

}  // namespace detail

inline constexpr std::size_t kOverlaySyntheticLines = 20;
inline constexpr std::size_t kOverlayGroundTruthSeries = 200;

/// Simulate -> transform -> synthesize -> invert -> evaluate, persisting every
/// artifact plus manifest.json under cfg.out_dir. When `persist` is false no
/// files are written.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, bool persist = true) {
  using clock = std::chrono::steady_clock;
  cfg.validate();

  const SeedTree seeds(cfg.base_seed);
  const SynthConfig synth_cfg = cfg.effective_synth();
  const ProcessSpec gt_spec = cfg.ground_truth_process();
  const int out_length = cfg.output_length();
  const auto budget = allocate_budget(cfg.total_synthetic, cfg.n_train);

  nlohmann::json manifest;
  manifest["version"] = std::string(kVersion);
  manifest["config"] = cfg;
  manifest["effective_synth"] = synth_cfg;
  manifest["seeds"] = {{"base", cfg.base_seed},
                       {"training", seeds.training},
                       {"ground_truth", seeds.ground_truth},
                       {"synthesis_root", seeds.synthesis},
                       {"job_rule", "derive_seed(derive_seed(synthesis_root, training_index), replica)"}};
  manifest["ground_truth_process"] = gt_spec;
  manifest["output_length"] = out_length;
  manifest["budget_per_training_series"] = budget;
  if (cfg.total_synthetic % cfg.n_train != 0) {
    manifest["warnings"].push_back("total_synthetic is not a multiple of n_train; first " +
                                   std::to_string(cfg.total_synthetic % cfg.n_train) +
                                   " training series receive one extra sample");
  }
  detail::ManifestWriter writer(cfg.out_dir, manifest);

  ExperimentResult result;
  std::string stage;
  auto stage_start = clock::now();
  auto begin_stage = [&](std::string name) {
    stage = std::move(name);
    stage_start = clock::now();
  };
  auto end_stage = [&] { writer.time(stage, std::chrono::duration<double>(clock::now() - stage_start).count()); };

  try {
    begin_stage("simulate");
    result.training = simulate_dataset(cfg.process, static_cast<std::size_t>(cfg.n_train),
                                       static_cast<std::size_t>(cfg.length), seeds.training);
    result.ground_truth = simulate_dataset(gt_spec, static_cast<std::size_t>(cfg.ground_truth_count),
                                           static_cast<std::size_t>(out_length), seeds.ground_truth);
    end_stage();

    begin_stage("transform");
    std::vector<Scalogram> targets;
    targets.reserve(result.training.size());
    for (const auto& s : result.training.series) targets.push_back(normalize(cwt(s, cfg.wavelet)));
    // build the inverse operator before the workers need it
    inverse_operator(cfg.wavelet, static_cast<std::size_t>(out_length));
    end_stage();

    begin_stage("synthesize");
    struct Job {
      std::size_t training_index;
      std::size_t replica;
    };
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < budget.size(); ++i) {
      for (int r = 0; r < budget[i]; ++r) jobs.push_back({i, static_cast<std::size_t>(r)});
    }
    const double out_dt = result.ground_truth.dt();
    std::vector<std::optional<TimeSeries>> outputs(jobs.size());
    std::optional<Scalogram> first_synthesis;
    detail::parallel_for(jobs.size(), cfg.threads, [&](std::size_t j) {
      const Job job = jobs[j];
      Scalogram sc = synthesize(targets[job.training_index], synth_cfg, seeds.job(job.training_index, job.replica));
      outputs[j] = icwt(denormalize(sc), static_cast<std::size_t>(out_length), cfg.wavelet, out_dt);
      if (j == 0) first_synthesis = std::move(sc);
    });
    result.synthetic.label = "synthetic:" + result.training.label;
    result.synthetic.seed = seeds.synthesis;
    result.synthetic.series.reserve(outputs.size());
    for (auto& o : outputs) result.synthetic.series.push_back(std::move(*o));
    end_stage();

    begin_stage("evaluate");
    result.report = precision_recall(to_features(result.ground_truth), to_features(result.synthetic), cfg.k);
    result.report.config = "base_seed=" + std::to_string(cfg.base_seed) + " " + synth_cfg.canonical();
    end_stage();

    if (persist) {
      begin_stage("persist");
      const auto kind = std::string(to_string(cfg.process.kind));
      writer.write_file("training.csv", [&](std::ostream& os) {
        io::write_dataset(os, result.training, kind, io::process_fields(cfg.process));
      });
      writer.write_file("ground_truth.csv", [&](std::ostream& os) {
        io::write_dataset(os, result.ground_truth, kind, io::process_fields(gt_spec));
      });
      writer.write_file("synthetic.csv", [&](std::ostream& os) {
        io::write_dataset(os, result.synthetic, "synthetic:" + kind,
                          {{"cfg", synth_cfg.canonical()}, {"base_seed", std::to_string(cfg.base_seed)}});
      });
      writer.write_file("report.csv", [&](std::ostream& os) {
        os << report_header() << '\n' << report_row(cfg, result.report) << '\n';
      });
      writer.write_file("plotdata/overlay_synthetic.csv", [&](std::ostream& os) {
        detail::write_overlay(os, result.synthetic, kOverlaySyntheticLines, true);
      });
      writer.write_file("plotdata/overlay_ground_truth.csv", [&](std::ostream& os) {
        detail::write_overlay(os, result.ground_truth, kOverlayGroundTruthSeries, false);
      });
      writer.write_file("plotdata/scalogram_real.csv", [&](std::ostream& os) { io::write_scalogram(os, targets.front()); });
      writer.write_file("plotdata/scalogram_synthetic.csv", [&](std::ostream& os) {
        io::write_scalogram(os, *first_synthesis,
                            {{"cfg", synth_cfg.canonical()}, {"seed", std::to_string(seeds.job(0, 0))}});
      });
      end_stage();
      writer.json()["status"] = "ok";
      writer.json()["report"] = {{"precision", result.report.precision}, {"recall", result.report.recall}};
      writer.flush();
    }
  } catch (const std::exception& e) {
    if (persist) {
      writer.json()["status"] = "failed";
      writer.json()["error"] = {{"stage", stage}, {"message", e.what()}};
      try {
        writer.flush();
      } catch (...) {
      }
    }
    throw Error(ErrorKind::Stage, "stage '" + stage + "' failed: " + e.what());
  }

  result.manifest = writer.json();
  return result;
}

// ---------------------------------------------------------------------------
// Tables

struct TableCell {
  ProcessKind process;
  int n_train;
  EvalReport report;
};

struct TableResult {
  Mode mode;
  std::vector<ProcessKind> processes;
  std::vector<int> n_values;
  std::vector<TableCell> cells;  // process-major

  const TableCell& at(ProcessKind p, int n) const {
    for (const auto& c : cells) {
      if (c.process == p && c.n_train == n) return c;
    }
    throw Error(ErrorKind::Parameter, "no table cell for the requested process and n");
  }
};

inline const std::vector<ProcessKind>& default_processes() {
  static const std::vector<ProcessKind> kinds{ProcessKind::BrownianBridge, ProcessKind::DriftedBrownianMotion,
                                              ProcessKind::WienerProcess};
  return kinds;
}

/// Rows are n values, columns are `<process>_precision,<process>_recall`.
inline void write_table_csv(std::ostream& os, const TableResult& t) {
  os << "n_train";
  for (auto p : t.processes) os << ',' << to_string(p) << "_precision," << to_string(p) << "_recall";
  os << '\n';
  for (int n : t.n_values) {
    os << n;
    for (auto p : t.processes) {
      const auto& c = t.at(p, n);
      os << ',' << io::format_double(c.report.precision) << ',' << io::format_double(c.report.recall);
    }
    os << '\n';
  }
}

/// One experiment per (process, n) using `base` for everything else. Cell
/// outputs go to `<out_dir>/<process>_n<n>/`.
inline TableResult run_table(const ExperimentConfig& base, const std::vector<ProcessKind>& processes,
                             const std::vector<int>& n_values, Mode mode, bool persist = true,
                             const std::function<void(const ExperimentConfig&, const EvalReport&)>& on_cell = {}) {
  TableResult table{mode, processes, n_values, {}};
  nlohmann::json manifest;
  manifest["version"] = std::string(kVersion);
  manifest["config"] = base;
  manifest["config"]["mode"] = mode;
  manifest["cells"] = nlohmann::json::array();
  std::ostringstream long_report;
  long_report << report_header() << '\n';

  for (auto p : processes) {
    for (int n : n_values) {
      ExperimentConfig cfg = base;
      cfg.process.kind = p;
      cfg.n_train = n;
      cfg.mode = mode;
      cfg.out_dir = base.out_dir / (std::string(to_string(p)) + "_n" + std::to_string(n));
      auto res = run_experiment(cfg, persist);
      table.cells.push_back({p, n, res.report});
      long_report << report_row(cfg, res.report) << '\n';
      manifest["cells"].push_back({{"process", p}, {"n_train", n}, {"dir", cfg.out_dir.filename().generic_string()}});
      if (on_cell) on_cell(cfg, res.report);
    }
  }

  if (persist) {
    detail::ManifestWriter writer(base.out_dir, manifest);
    writer.write_file("report.csv", [&](std::ostream& os) { os << long_report.str(); });
    writer.write_file("table.csv", [&](std::ostream& os) { write_table_csv(os, table); });
    writer.write_file("plotdata/table.csv", [&](std::ostream& os) { write_table_csv(os, table); });
    writer.json()["status"] = "ok";
    writer.flush();
  }
  return table;
}

}  // namespace wavesynth
