#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lagscope/bootstrap.hpp"
#include "lagscope/estimators.hpp"
#include "lagscope/siggen.hpp"

namespace lagscope::harness {

using estimators::Method;

enum class NoiseKind { gaussian, exponential, autocorr };

std::string noise_name(NoiseKind k);
std::optional<NoiseKind> noise_from_name(const std::string& name);

struct ExperimentConfig {
  NoiseKind noise_kind = NoiseKind::exponential;
  bool mixed = true;  // theta = 0.7 when mixed, otherwise 0
  std::vector<double> snr_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  std::size_t n_trial = 100;
  std::int64_t tau_min = -99;  // sampling bounds, nonzero delays only
  std::int64_t tau_max = 99;
  std::size_t seg_len = 200;
  std::size_t n_segments = 65;  // trial length = n_segments * seg_len
  double fs = 100.0;
  std::size_t n_boot = 200;
  double ci_width = 0.95;
  std::vector<Method> methods = {Method::crosscorr, Method::phase_slope,
                                 Method::phase_periodicity, Method::bispec_m1,
                                 Method::asb_m1};
  std::uint64_t master_seed = 0;
  std::size_t threads = 0;  // 0 = hardware concurrency

  double theta() const { return mixed ? 0.7 : 0.0; }
  void validate() const;  // throws std::invalid_argument naming the field
};

struct ResultRow {
  Method method;
  double alpha = 0.0;
  bool mixed = false;
  double mae_ms = 0.0;
  double mae_ms_filtered = 0.0;  // NaN when no trial was accepted
  double rejection_rate = 0.0;
  std::size_t n_accepted = 0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;  // keyed (method, alpha), method-major
  std::string config_hash;
  std::uint64_t master_seed = 0;
  ExperimentConfig config;
};

struct BiasRow {
  Method method;
  double alpha = 0.0;
  bool mixed = false;
  std::int64_t tau_true = 0;
  double tau_est = 0.0;  // bootstrap-mean estimate in samples
};

struct PccSummary {
  Method method;
  double alpha = 0.0;
  bool mixed = false;
  double r = 0.0;
  double p = 1.0;
  std::size_t dof = 0;
  std::size_t n = 0;
  bool defined = false;  // false when either variable has zero variance
};

struct BiasResult {
  std::vector<BiasRow> rows;
  std::vector<PccSummary> pcc;  // over rows with |tau_true| <= seg_len / 2
  std::string config_hash;
  std::uint64_t master_seed = 0;
};

// Generate trials over the SNR grid, bootstrap every configured method, and
// aggregate MAE (unfiltered and over accepted trials) plus rejection rates.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Bootstrap-mean estimates for each tau in [tau_min, tau_max] (including
// zero), n_per_tau independently generated trials each, plus Pearson
// correlation between true and estimated delays within the segment bound.
BiasResult run_bias_sweep(const ExperimentConfig& cfg, std::size_t n_per_tau);

// Mean over trials of |tau_true - boot_mean|, in milliseconds.
double mae(std::span<const double> truths_samples, std::span<const double> boot_means,
           double fs);

struct PearsonResult {
  double r = 0.0;
  double p = 1.0;
  std::size_t dof = 0;
  bool defined = false;
};

// Sample correlation with a two-sided p-value from the exact t distribution
// (regularized incomplete beta).
PearsonResult pearson(std::span<const double> x, std::span<const double> y);

// Regularized incomplete beta I_x(a, b) via Lentz continued fractions.
double incomplete_beta(double a, double b, double x);

// Two-column numeric CSV with an optional single header line.
siggen::TrialPair load_pair_csv(const std::string& path, double fs, std::size_t seg_len);

enum class OutputFormat { csv, json };

void write_results(const ExperimentResult& result, OutputFormat format, const std::string& path);
void write_bias(const BiasResult& result, OutputFormat format, const std::string& path);

std::string results_to_csv(const ExperimentResult& result);
std::string results_to_json(const ExperimentResult& result);
std::string bias_to_csv(const BiasResult& result);
std::string bias_to_json(const BiasResult& result);

ExperimentResult results_from_json(const std::string& text);

std::string config_hash(const ExperimentConfig& cfg);
std::string format_double(double v);  // shortest round-trip representation

}  // namespace lagscope::harness
