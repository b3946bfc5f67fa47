// lagscope: time-delay estimation between two noisy channels.
//
// Subcommands:
//   simulate  run the synthetic benchmark over an SNR grid
//   estimate  per-method bootstrap report for a two-column CSV recording
//   bias      true-vs-estimated delay sweep with Pearson summaries
//   selftest  fast internal consistency checks
//
// Exit codes: 0 success, 1 selftest failure, 2 usage/config/IO error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>

#include "lagscope/bootstrap.hpp"
#include "lagscope/estimators.hpp"
#include "lagscope/harness.hpp"
#include "lagscope/rng.hpp"
#include "lagscope/siggen.hpp"
#include "lagscope/spectral.hpp"

namespace {

using json = nlohmann::ordered_json;
using lagscope::Rng;
using lagscope::estimators::Method;
using lagscope::harness::ExperimentConfig;

std::size_t env_threads() {
  const char* raw = std::getenv("LAGSCOPE_THREADS");
  if (!raw) return 0;
  const long v = std::strtol(raw, nullptr, 10);
  return v > 0 ? static_cast<std::size_t>(v) : 0;
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> methods;
  for (const auto& name : names) {
    const auto m = lagscope::estimators::method_from_name(name);
    if (!m) throw std::invalid_argument("unknown method: " + name);
    methods.push_back(*m);
  }
  return methods;
}

// Partial config file: present keys override defaults, flags override both.
void apply_config_file(ExperimentConfig& cfg, const std::string& path,
                       std::optional<std::uint64_t>& seed) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  json j;
  in >> j;
  if (j.contains("noise")) {
    const auto kind = lagscope::harness::noise_from_name(j["noise"].get<std::string>());
    if (!kind) throw std::invalid_argument("config: unknown noise kind");
    cfg.noise_kind = *kind;
  }
  if (j.contains("mixed")) cfg.mixed = j["mixed"].get<bool>();
  if (j.contains("snr_grid")) cfg.snr_grid = j["snr_grid"].get<std::vector<double>>();
  if (j.contains("n_trial")) cfg.n_trial = j["n_trial"].get<std::size_t>();
  if (j.contains("tau_min")) cfg.tau_min = j["tau_min"].get<std::int64_t>();
  if (j.contains("tau_max")) cfg.tau_max = j["tau_max"].get<std::int64_t>();
  if (j.contains("seg_len")) cfg.seg_len = j["seg_len"].get<std::size_t>();
  if (j.contains("n_segments")) cfg.n_segments = j["n_segments"].get<std::size_t>();
  if (j.contains("fs")) cfg.fs = j["fs"].get<double>();
  if (j.contains("n_boot")) cfg.n_boot = j["n_boot"].get<std::size_t>();
  if (j.contains("ci_width")) cfg.ci_width = j["ci_width"].get<double>();
  if (j.contains("methods"))
    cfg.methods = parse_methods(j["methods"].get<std::vector<std::string>>());
  if (j.contains("seed")) seed = j["seed"].get<std::uint64_t>();
}

struct CommonSimArgs {
  std::string config_path;
  std::string noise = "exponential";
  bool mixed = false;
  bool unmixed = false;
  std::vector<double> alphas;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
  std::vector<std::string> method_names;
  std::string output;
  std::string format = "csv";
  bool paper_scale = false;
};

void add_common_options(CLI::App* cmd, CommonSimArgs& args, ExperimentConfig& cfg) {
  cmd->add_option("--config", args.config_path, "JSON config file (flags override it)");
  cmd->add_option("--noise", args.noise, "noise kind: gaussian|exponential|autocorr");
  cmd->add_flag("--mixed", args.mixed, "cross-inject noise with theta = 0.7");
  cmd->add_flag("--unmixed", args.unmixed, "independent noise (theta = 0)");
  cmd->add_option("--alpha", args.alphas, "SNR grid values in [0, 1]");
  cmd->add_option("--n-trial", cfg.n_trial, "trials per SNR value");
  cmd->add_option("--n-boot", cfg.n_boot, "bootstrap iterations");
  cmd->add_option("--width", cfg.ci_width, "confidence interval width in (0, 1)");
  cmd->add_option("--seg-len", cfg.seg_len, "segment length in samples");
  cmd->add_option("--n-segments", cfg.n_segments, "segments per trial");
  cmd->add_option("--fs", cfg.fs, "sampling rate in Hz");
  cmd->add_option("--tau-min", cfg.tau_min, "lower delay bound in samples");
  cmd->add_option("--tau-max", cfg.tau_max, "upper delay bound in samples");
  cmd->add_option("--methods", args.method_names, "estimators to run");
  cmd->add_option("--seed", args.seed, "master seed (required)");
  cmd->add_option("--threads", args.threads, "worker threads (or LAGSCOPE_THREADS)");
  cmd->add_option("-o,--output", args.output, "output file path");
  cmd->add_option("--format", args.format, "output format: csv|json");
  cmd->add_flag("--paper-scale", args.paper_scale,
                "full-scale preset: 500 trials, 500 bootstrap iterations, "
                "alpha 0..1 in steps of 0.1 (slow)");
}

ExperimentConfig resolve_config(const CLI::App* cmd, CommonSimArgs& args,
                                ExperimentConfig flag_cfg) {
  ExperimentConfig cfg;
  std::optional<std::uint64_t> seed;
  if (!args.config_path.empty()) apply_config_file(cfg, args.config_path, seed);

  if (args.paper_scale) {
    cfg.n_trial = 500;
    cfg.n_boot = 500;
    cfg.snr_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  }

  // flags win over the file and the preset
  if (cmd->count("--noise")) {
    const auto kind = lagscope::harness::noise_from_name(args.noise);
    if (!kind) throw std::invalid_argument("unknown noise kind: " + args.noise);
    cfg.noise_kind = *kind;
  }
  if (args.mixed && args.unmixed)
    throw std::invalid_argument("--mixed and --unmixed are exclusive");
  if (args.mixed) cfg.mixed = true;
  if (args.unmixed) cfg.mixed = false;
  if (cmd->count("--alpha")) cfg.snr_grid = args.alphas;
  if (cmd->count("--n-trial")) cfg.n_trial = flag_cfg.n_trial;
  if (cmd->count("--n-boot")) cfg.n_boot = flag_cfg.n_boot;
  if (cmd->count("--width")) cfg.ci_width = flag_cfg.ci_width;
  if (cmd->count("--seg-len")) cfg.seg_len = flag_cfg.seg_len;
  if (cmd->count("--n-segments")) cfg.n_segments = flag_cfg.n_segments;
  if (cmd->count("--fs")) cfg.fs = flag_cfg.fs;
  if (cmd->count("--tau-min")) cfg.tau_min = flag_cfg.tau_min;
  if (cmd->count("--tau-max")) cfg.tau_max = flag_cfg.tau_max;
  if (cmd->count("--methods")) cfg.methods = parse_methods(args.method_names);
  if (args.seed) seed = args.seed;

  cfg.threads = args.threads > 0 ? args.threads : env_threads();
  if (!seed) throw std::invalid_argument("a --seed is required (no wall-clock default)");
  cfg.master_seed = *seed;
  cfg.validate();
  return cfg;
}

lagscope::harness::OutputFormat parse_format(const std::string& name) {
  if (name == "csv") return lagscope::harness::OutputFormat::csv;
  if (name == "json") return lagscope::harness::OutputFormat::json;
  throw std::invalid_argument("unknown format: " + name);
}

int cmd_simulate(const CLI::App* cmd, CommonSimArgs& args, const ExperimentConfig& flag_cfg) {
  const ExperimentConfig cfg = resolve_config(cmd, args, flag_cfg);
  const auto result = lagscope::harness::run_experiment(cfg);
  if (!args.output.empty())
    lagscope::harness::write_results(result, parse_format(args.format), args.output);
  std::cout << lagscope::harness::results_to_csv(result);
  return 0;
}

int cmd_bias(const CLI::App* cmd, CommonSimArgs& args, const ExperimentConfig& flag_cfg,
             std::size_t n_per_tau) {
  const ExperimentConfig cfg = resolve_config(cmd, args, flag_cfg);
  const auto result = lagscope::harness::run_bias_sweep(cfg, n_per_tau);
  if (!args.output.empty())
    lagscope::harness::write_bias(result, parse_format(args.format), args.output);
  std::cout << "method,alpha,mixed,pcc,p_value,dof,n\n";
  for (const auto& s : result.pcc) {
    std::cout << lagscope::estimators::method_name(s.method) << ','
              << lagscope::harness::format_double(s.alpha) << ','
              << (s.mixed ? "true" : "false") << ','
              << (s.defined ? lagscope::harness::format_double(s.r) : "undefined") << ','
              << (s.defined ? lagscope::harness::format_double(s.p) : "undefined") << ','
              << s.dof << ',' << s.n << '\n';
  }
  return 0;
}

int cmd_estimate(const std::string& input, double fs, std::size_t seg_len,
                 const std::vector<std::string>& method_names, std::size_t n_boot,
                 double width, std::uint64_t seed, const std::string& output) {
  const auto pair = lagscope::harness::load_pair_csv(input, fs, seg_len);
  const std::vector<Method> methods =
      method_names.empty()
          ? std::vector<Method>{Method::crosscorr, Method::phase_slope,
                                Method::phase_periodicity, Method::bispec_m1, Method::asb_m1}
          : parse_methods(method_names);

  const lagscope::bootstrap::TrialCaches caches(pair, seg_len, methods, seg_len / 2 - 1);
  const auto verdicts =
      lagscope::bootstrap::bootstrap_many(caches, methods, n_boot, width, seed);

  json report;
  report["schema"] = 1;
  report["input"] = input;
  report["fs"] = fs;
  report["seg_len"] = seg_len;
  report["n_boot"] = n_boot;
  report["ci_width"] = width;
  json per_method = json::array();
  const double ms = 1000.0 / fs;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const auto& v = verdicts[mi];
    json entry;
    entry["method"] = lagscope::estimators::method_name(methods[mi]);
    entry["valid"] = v.valid;
    entry["n_undefined"] = v.n_undefined;
    if (v.valid) {
      entry["median_samples"] = v.median;
      entry["median_ms"] = v.median * ms;
      entry["mean_samples"] = v.mean;
      entry["iqr_samples"] = v.iqr;
      entry["iqr_ms"] = v.iqr * ms;
      entry["ci_low_samples"] = v.ci_low;
      entry["ci_high_samples"] = v.ci_high;
      entry["accepted"] = v.accepted;
    }
    per_method.push_back(std::move(entry));
  }
  report["methods"] = per_method;
  const std::string text = report.dump(2) + "\n";
  if (!output.empty()) {
    std::ofstream out(output, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + output);
    out << text;
  } else {
    std::cout << text;
  }
  return 0;
}

// Fast internal checks: noiseless exactness for every protocol plus the
// shift-theorem oracle. Returns the number of failures.
int run_selftest() {
  int failures = 0;
  auto check = [&](bool ok, const std::string& name) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
    if (!ok) ++failures;
  };

  const std::size_t seg_len = 200, n_seg = 65;
  const std::size_t t_len = n_seg * seg_len;
  for (const std::int64_t tau : {-50L, -1L, 12L, 99L}) {
    Rng rs(7);
    auto signal = lagscope::siggen::gen_white(lagscope::siggen::WhiteKind::exponential,
                                              t_len + 2 * seg_len, rs);
    signal.fs = 100.0;
    Rng rnx(8), rny(9);
    auto nx = lagscope::siggen::gen_white(lagscope::siggen::WhiteKind::exponential, t_len, rnx);
    auto ny = lagscope::siggen::gen_white(lagscope::siggen::WhiteKind::exponential, t_len, rny);
    nx.fs = ny.fs = 100.0;
    const lagscope::siggen::MixParams p{1.0, 0.0, 0.0, 1, tau};
    const auto pair = lagscope::siggen::assemble_trial(signal, nx, ny, p);
    const Method methods[] = {Method::crosscorr, Method::phase_slope,
                              Method::phase_periodicity, Method::bispec_m1, Method::asb_m1};
    const lagscope::bootstrap::TrialCaches caches(pair, seg_len, methods, seg_len / 2 - 1,
                                                  false);
    bool all_exact = true;
    for (const Method m : methods)
      all_exact = all_exact && caches.estimate(m).lag_samples == tau;
    check(all_exact, "noiseless exactness at tau = " + std::to_string(tau));
  }

  {
    Rng rng(3);
    std::vector<std::vector<double>> sx(2, std::vector<double>(seg_len));
    for (auto& seg : sx)
      for (auto& v : seg) v = rng.exponential() - 1.0;
    std::vector<std::vector<double>> sy = sx;
    const std::int64_t tau = 31;
    for (std::size_t s = 0; s < 2; ++s)
      for (std::size_t t = 0; t < seg_len; ++t)
        sy[s][t] = sx[s][(t + seg_len - static_cast<std::size_t>(tau)) % seg_len];
    const auto fx = lagscope::spectral::fft_frames(sx, 100.0);
    const auto fy = lagscope::spectral::fft_frames(sy, 100.0);
    const auto s = lagscope::spectral::cross_spectrum(fx, fy);
    double worst = 0.0;
    for (std::size_t k = 0; k < seg_len; ++k) {
      const double expected = std::remainder(
          2.0 * std::numbers::pi * static_cast<double>(k) * static_cast<double>(tau) / 200.0,
          2.0 * std::numbers::pi);
      worst = std::max(worst, std::abs(std::remainder(std::arg(s.values[k]) - expected,
                                                      2.0 * std::numbers::pi)));
    }
    check(worst < 1e-9, "shift theorem phase match");
  }
  return failures;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lagscope: cross- and bispectral time-delay estimation"};
  app.require_subcommand(1);

  CommonSimArgs sim_args, bias_args;
  ExperimentConfig sim_cfg, bias_cfg;
  auto* simulate = app.add_subcommand("simulate", "run the synthetic benchmark");
  add_common_options(simulate, sim_args, sim_cfg);

  auto* bias = app.add_subcommand("bias", "true-vs-estimated delay sweep");
  std::size_t n_per_tau = 10;
  add_common_options(bias, bias_args, bias_cfg);
  bias->add_option("--n-per-tau", n_per_tau, "trials per delay value");

  auto* estimate = app.add_subcommand("estimate", "estimate delays in a two-column CSV");
  std::string est_input, est_output;
  double est_fs = 100.0, est_width = 0.95;
  std::size_t est_seg_len = 200, est_n_boot = 500;
  std::uint64_t est_seed = 1;
  std::vector<std::string> est_methods;
  estimate->add_option("--input,-i", est_input, "two-column CSV path")->required();
  estimate->add_option("--fs", est_fs, "sampling rate in Hz");
  estimate->add_option("--seg-len", est_seg_len, "segment length in samples");
  estimate->add_option("--methods", est_methods, "estimators to run");
  estimate->add_option("--n-boot", est_n_boot, "bootstrap iterations");
  estimate->add_option("--width", est_width, "confidence interval width");
  estimate->add_option("--seed", est_seed, "bootstrap seed");
  estimate->add_option("-o,--output", est_output, "report path (stdout otherwise)");

  auto* selftest = app.add_subcommand("selftest", "fast internal consistency checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(simulate, sim_args, sim_cfg);
    if (bias->parsed()) return cmd_bias(bias, bias_args, bias_cfg, n_per_tau);
    if (estimate->parsed())
      return cmd_estimate(est_input, est_fs, est_seg_len, est_methods, est_n_boot, est_width,
                          est_seed, est_output);
    if (selftest->parsed()) return run_selftest() == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
