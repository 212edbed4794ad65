// Command-line front end: simulate, transform, generate, evaluate,
// experiment, table.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "wavesynth/wavesynth.hpp"

namespace ws = wavesynth;
namespace fs = std::filesystem;

namespace {

ws::ProcessKind process_from(const std::string& name) {
  auto kind = ws::parse_process_kind(name);
  if (!kind) throw ws::Error(ws::ErrorKind::Parameter, "unknown process '" + name + "'");
  return *kind;
}

ws::Mode mode_from(const std::string& name) {
  auto mode = ws::parse_mode(name);
  if (!mode) throw ws::Error(ws::ErrorKind::Parameter, "unknown mode '" + name + "'");
  return *mode;
}

struct ProcessFlags {
  std::optional<std::string> kind;
  std::optional<double> drift, volatility, terminal, horizon;

  void add(CLI::App* app) {
    app->add_option("--process", kind, "WienerProcess|BrownianBridge|DriftedBrownianMotion (or wiener|bridge|drifted)");
    app->add_option("--drift", drift, "drift mu (DriftedBrownianMotion)");
    app->add_option("--volatility", volatility, "volatility sigma");
    app->add_option("--terminal", terminal, "bridge endpoint");
    app->add_option("--horizon", horizon, "time horizon T");
  }

  void apply(ws::ProcessSpec& p) const {
    if (kind) p.kind = process_from(*kind);
    if (drift) p.drift = *drift;
    if (volatility) p.volatility = *volatility;
    if (terminal) p.terminal = *terminal;
    if (horizon) p.horizon = *horizon;
  }
};

struct WaveletFlags {
  std::optional<double> omega0, truncation, ridge;
  std::optional<std::vector<double>> scales;

  void add(CLI::App* app) {
    app->add_option("--omega0", omega0, "Morlet center frequency");
    app->add_option("--scales", scales, "wavelet scales, strictly increasing")->delimiter(',');
    app->add_option("--kernel-truncation", truncation, "kernel half-support in units of scale");
    app->add_option("--ridge", ridge, "inverse transform ridge weight");
  }

  void apply(ws::WaveletConfig& w) const {
    if (omega0) w.omega0 = *omega0;
    if (scales) w.scales = *scales;
    if (truncation) w.kernel_truncation = *truncation;
    if (ridge) w.ridge = *ridge;
  }
};

struct SynthFlags {
  std::optional<int> patch_size, stride, min_width, num_projections, steps_per_level;
  std::optional<double> pyramid_ratio, noise_sigma, retarget_factor;

  void add(CLI::App* app, bool with_retarget) {
    app->add_option("--patch-size", patch_size, "patch width p");
    app->add_option("--stride", stride, "patch stride");
    app->add_option("--pyramid-ratio", pyramid_ratio, "per-level time-axis downscale");
    app->add_option("--min-width", min_width, "coarsest level minimum width");
    app->add_option("--num-projections", num_projections, "random projections per update");
    app->add_option("--steps-per-level", steps_per_level, "patch-matching steps per level");
    app->add_option("--noise-sigma", noise_sigma, "coarse-level initialization noise");
    if (with_retarget) app->add_option("--retarget-factor", retarget_factor, "output/input width ratio");
  }

  void apply(ws::SynthConfig& s) const {
    if (patch_size) s.patch_size = *patch_size;
    if (stride) s.stride = *stride;
    if (pyramid_ratio) s.pyramid_ratio = *pyramid_ratio;
    if (min_width) s.min_width = *min_width;
    if (num_projections) s.num_projections = *num_projections;
    if (steps_per_level) s.steps_per_level = *steps_per_level;
    if (noise_sigma) s.noise_sigma = *noise_sigma;
    if (retarget_factor) s.retarget_factor = *retarget_factor;
  }
};

struct ExperimentFlags {
  std::optional<std::string> config_file;
  ProcessFlags process;
  WaveletFlags wavelet;
  SynthFlags synth;
  std::optional<int> n_train, total_synthetic, ground_truth_count, length, k;
  std::optional<std::string> mode, out_dir, retarget_ground_truth;
  std::optional<std::uint64_t> seed;
  std::optional<double> scale;
  unsigned threads = 0;

  void add(CLI::App* app, bool with_mode) {
    app->add_option("--config", config_file, "JSON config (or a run manifest)")->check(CLI::ExistingFile);
    process.add(app);
    wavelet.add(app);
    synth.add(app, false);
    app->add_option("--n-train", n_train, "training series count");
    app->add_option("--total-synthetic", total_synthetic, "pooled synthetic budget");
    app->add_option("--ground-truth-count", ground_truth_count, "ground truth series count");
    app->add_option("--length", length, "training series length");
    app->add_option("--k", k, "k for the k-NN manifolds");
    if (with_mode) app->add_option("--mode", mode, "Reshuffle|Retarget2x (or reshuffle|retarget)");
    app->add_option("--retarget-ground-truth", retarget_ground_truth, "ExtendHorizon|RefineGrid");
    app->add_option("--seed", seed, "base seed");
    app->add_option("--out", out_dir, "output directory");
    app->add_option("--scale", scale, "shrink ground truth and synthetic budgets by this factor (desk runs)");
    app->add_option("--threads", threads, "worker threads (0 = all cores)");
  }

  ws::ExperimentConfig build() const {
    ws::ExperimentConfig cfg;
    if (config_file) {
      std::ifstream is(*config_file);
      cfg = nlohmann::json::parse(is).get<ws::ExperimentConfig>();
    }
    process.apply(cfg.process);
    wavelet.apply(cfg.wavelet);
    synth.apply(cfg.synth);
    if (n_train) cfg.n_train = *n_train;
    if (total_synthetic) cfg.total_synthetic = *total_synthetic;
    if (ground_truth_count) cfg.ground_truth_count = *ground_truth_count;
    if (length) cfg.length = *length;
    if (k) cfg.k = *k;
    if (mode) cfg.mode = mode_from(*mode);
    if (retarget_ground_truth) {
      cfg.retarget_ground_truth = nlohmann::json(*retarget_ground_truth).get<ws::RetargetGroundTruth>();
    }
    if (seed) cfg.base_seed = *seed;
    if (out_dir) cfg.out_dir = *out_dir;
    if (scale) cfg.apply_scale(*scale);
    cfg.threads = threads;
    return cfg;
  }
};

std::vector<ws::ProcessKind> processes_from(const std::vector<std::string>& names) {
  if (names.empty()) return ws::default_processes();
  std::vector<ws::ProcessKind> out;
  for (const auto& n : names) out.push_back(process_from(n));
  return out;
}

void print_report(const ws::ExperimentConfig& cfg, const ws::EvalReport& r) {
  std::cout << ws::report_row(cfg, r) << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-series time-series synthesis through wavelet scalogram patch matching"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ws::kVersion));

  // simulate
  auto* sim = app.add_subcommand("simulate", "simulate a dataset of process paths");
  ProcessFlags sim_process;
  sim_process.add(sim);
  std::size_t sim_count = 1, sim_length = 256;
  std::uint64_t sim_seed = 0;
  std::string sim_out;
  sim->add_option("--count", sim_count, "number of paths");
  sim->add_option("--length", sim_length, "samples per path");
  sim->add_option("--seed", sim_seed, "base seed");
  sim->add_option("--out", sim_out, "dataset CSV")->required();

  // transform
  auto* transform = app.add_subcommand("transform", "forward or inverse wavelet transform");
  transform->require_subcommand(1);
  auto* fwd = transform->add_subcommand("cwt", "dataset row -> scalogram");
  WaveletFlags fwd_wavelet;
  fwd_wavelet.add(fwd);
  std::string fwd_in, fwd_out;
  std::size_t fwd_index = 0;
  bool fwd_normalize = false;
  fwd->add_option("--in", fwd_in, "dataset CSV")->required()->check(CLI::ExistingFile);
  fwd->add_option("--index", fwd_index, "row of the dataset to transform");
  fwd->add_option("--out", fwd_out, "scalogram CSV")->required();
  fwd->add_flag("--normalize", fwd_normalize, "min-max normalize to [0, 1]");

  auto* inv = transform->add_subcommand("icwt", "scalogram -> single-row dataset");
  WaveletFlags inv_wavelet;
  inv_wavelet.add(inv);
  std::string inv_in, inv_out;
  std::optional<double> inv_dt;
  inv->add_option("--in", inv_in, "scalogram CSV")->required()->check(CLI::ExistingFile);
  inv->add_option("--out", inv_out, "dataset CSV")->required();
  inv->add_option("--dt", inv_dt, "sample spacing of the output (default 1/(L-1))");

  // generate
  auto* gen = app.add_subcommand("generate", "synthesize one scalogram from a target scalogram");
  SynthFlags gen_synth;
  gen_synth.add(gen, true);
  WaveletFlags gen_wavelet;
  gen_wavelet.add(gen);
  std::string gen_in, gen_out;
  std::optional<std::string> gen_series_out;
  std::uint64_t gen_seed = 0;
  gen->add_option("--in", gen_in, "target scalogram CSV (normalized or signed)")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", gen_out, "synthesized scalogram CSV")->required();
  gen->add_option("--series-out", gen_series_out, "also write the inverted time series here");
  gen->add_option("--seed", gen_seed, "synthesis seed");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "improved precision/recall of two dataset files");
  std::string eval_real, eval_fake;
  std::optional<std::string> eval_out;
  int eval_k = 3;
  eval->add_option("--real", eval_real, "ground truth dataset CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--fake", eval_fake, "synthetic dataset CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--k", eval_k, "k for the k-NN manifolds");
  eval->add_option("--out", eval_out, "report CSV");

  // experiment
  auto* exp = app.add_subcommand("experiment", "full simulate/synthesize/evaluate run");
  ExperimentFlags exp_flags;
  exp_flags.add(exp, true);

  // table
  auto* table = app.add_subcommand("table", "process x training-size grid");
  ExperimentFlags table_flags;
  table_flags.add(table, true);
  std::vector<std::string> table_processes;
  std::vector<int> table_n{5, 50, 500};
  table->add_option("--processes", table_processes, "processes (default: all three)")->delimiter(',');
  table->add_option("--n-values", table_n, "training sizes")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      ws::ProcessSpec spec;
      sim_process.apply(spec);
      const auto ds = ws::simulate_dataset(spec, sim_count, sim_length, sim_seed);
      auto os = ws::io::open_output(sim_out);
      ws::io::write_dataset(os, ds, ws::to_string(spec.kind), ws::io::process_fields(spec));
    } else if (*fwd) {
      ws::WaveletConfig wc;
      fwd_wavelet.apply(wc);
      auto is = ws::io::open_input(fwd_in);
      const auto file = ws::io::read_dataset(is);
      if (fwd_index >= file.dataset.size()) throw ws::Error(ws::ErrorKind::Parameter, "--index out of range");
      auto sc = ws::cwt(file.dataset.series[fwd_index], wc);
      if (fwd_normalize) sc = ws::normalize(sc);
      auto os = ws::io::open_output(fwd_out);
      ws::io::write_scalogram(os, sc);
    } else if (*inv) {
      ws::WaveletConfig wc;
      inv_wavelet.apply(wc);
      auto is = ws::io::open_input(inv_in);
      auto sc = ws::io::read_scalogram(is).scalogram;
      wc.scales = sc.scales;
      if (sc.norm) sc = ws::denormalize(sc);
      const auto length = static_cast<std::size_t>(sc.width());
      const double dt = inv_dt.value_or(1.0 / static_cast<double>(length - 1));
      ws::Dataset ds{{ws::icwt(sc, length, wc, dt)}, "icwt", 0};
      auto os = ws::io::open_output(inv_out);
      ws::io::write_dataset(os, ds, "icwt");
    } else if (*gen) {
      ws::SynthConfig scfg;
      gen_synth.apply(scfg);
      ws::WaveletConfig wc;
      gen_wavelet.apply(wc);
      auto is = ws::io::open_input(gen_in);
      auto target = ws::io::read_scalogram(is).scalogram;
      if (!target.norm) target = ws::normalize(target);
      const auto out = ws::synthesize(target, scfg, gen_seed);
      auto os = ws::io::open_output(gen_out);
      ws::io::write_scalogram(os, out, {{"cfg", scfg.canonical()}, {"seed", std::to_string(gen_seed)}});
      if (gen_series_out) {
        wc.scales = out.scales;
        const auto length = static_cast<std::size_t>(out.width());
        ws::Dataset ds{{ws::icwt(ws::denormalize(out), length, wc, 1.0 / static_cast<double>(length - 1))},
                       "generated", gen_seed};
        auto series_os = ws::io::open_output(*gen_series_out);
        ws::io::write_dataset(series_os, ds, "generated", {{"cfg", scfg.canonical()}});
      }
    } else if (*eval) {
      auto real_is = ws::io::open_input(eval_real);
      auto fake_is = ws::io::open_input(eval_fake);
      const auto real = ws::io::read_dataset(real_is);
      const auto fake = ws::io::read_dataset(fake_is);
      const auto r = ws::precision_recall(ws::to_features(real.dataset), ws::to_features(fake.dataset), eval_k);
      std::ostringstream row;
      row << real.dataset.label << ",," << "," << ws::io::format_double(r.precision) << ','
          << ws::io::format_double(r.recall) << ',' << r.k << ',' << r.m_real << ',' << r.m_fake << ','
          << fake.dataset.seed;
      std::cout << row.str() << std::endl;
      if (eval_out) {
        auto os = ws::io::open_output(*eval_out);
        os << ws::report_header() << '\n' << row.str() << '\n';
      }
    } else if (*exp) {
      const auto cfg = exp_flags.build();
      const auto res = ws::run_experiment(cfg);
      print_report(cfg, res.report);
    } else if (*table) {
      auto cfg = table_flags.build();
      const auto t = ws::run_table(cfg, processes_from(table_processes), table_n, cfg.mode, true,
                                   [](const ws::ExperimentConfig& c, const ws::EvalReport& r) { print_report(c, r); });
      ws::write_table_csv(std::cout, t);
    }
  } catch (const std::exception& e) {
    std::cerr << "wavesynth: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
