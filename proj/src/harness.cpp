#include "lagscope/harness.hpp"

#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "lagscope/rng.hpp"

namespace lagscope::harness {

using estimators::DelayEstimate;

std::string noise_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::gaussian: return "gaussian";
    case NoiseKind::exponential: return "exponential";
    case NoiseKind::autocorr: return "autocorr";
  }
  return "unknown";
}

std::optional<NoiseKind> noise_from_name(const std::string& name) {
  if (name == "gaussian") return NoiseKind::gaussian;
  if (name == "exponential") return NoiseKind::exponential;
  if (name == "autocorr") return NoiseKind::autocorr;
  return std::nullopt;
}

void ExperimentConfig::validate() const {
  for (double a : snr_grid)
    if (a < 0.0 || a > 1.0) throw std::invalid_argument("config: snr_grid entry outside [0, 1]");
  if (snr_grid.empty()) throw std::invalid_argument("config: snr_grid is empty");
  if (seg_len < 2) throw std::invalid_argument("config: seg_len must be >= 2");
  if (n_segments < 2) throw std::invalid_argument("config: n_segments must be >= 2");
  if (fs <= 0.0) throw std::invalid_argument("config: fs must be positive");
  if (n_boot < 1) throw std::invalid_argument("config: n_boot must be >= 1");
  if (!(ci_width > 0.0 && ci_width < 1.0))
    throw std::invalid_argument("config: ci_width outside (0, 1)");
  if (methods.empty()) throw std::invalid_argument("config: methods is empty");
  if (tau_min > tau_max) throw std::invalid_argument("config: tau_min greater than tau_max");
  if (tau_min == 0 && tau_max == 0)
    throw std::invalid_argument("config: tau range contains no nonzero delay");
}

namespace {

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

// Index-claiming worker pool. Results are written to preallocated slots, so
// the outcome does not depend on scheduling.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& body) {
  if (n == 0) return;
  threads = std::min(resolve_threads(threads), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load(std::memory_order_relaxed)) break;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

siggen::SourceSeries gen_noise(NoiseKind kind, std::size_t n, double fs, Rng& rng) {
  siggen::SourceSeries out;
  switch (kind) {
    case NoiseKind::gaussian: out = siggen::gen_white(siggen::WhiteKind::gaussian, n, rng); break;
    case NoiseKind::exponential:
      out = siggen::gen_white(siggen::WhiteKind::exponential, n, rng);
      break;
    case NoiseKind::autocorr: out = siggen::gen_autocorr_noise(n, fs, rng); break;
  }
  out.fs = fs;
  return out;
}

struct TrialMaterial {
  siggen::TrialPair pair;
  std::int64_t tau = 0;
};

// Source realizations depend only on (master_seed, block, index) so mixed and
// unmixed runs at the same seed share them; theta enters at assembly only.
TrialMaterial make_trial(const ExperimentConfig& cfg, double alpha, std::uint64_t trial_seed,
                         std::optional<std::int64_t> forced_tau) {
  const std::size_t t_len = cfg.n_segments * cfg.seg_len;
  const std::size_t margin =
      static_cast<std::size_t>(std::max(std::llabs(cfg.tau_min), std::llabs(cfg.tau_max)));

  std::int64_t tau;
  if (forced_tau) {
    tau = *forced_tau;
  } else {
    Rng rng_tau(Rng::derive(trial_seed, 1));
    do {
      tau = rng_tau.uniform_int(cfg.tau_min, cfg.tau_max);
    } while (tau == 0);
  }

  Rng rng_sig(Rng::derive(trial_seed, 2));
  siggen::SourceSeries signal =
      siggen::gen_white(siggen::WhiteKind::exponential, t_len + 2 * margin, rng_sig);
  signal.fs = cfg.fs;

  Rng rng_nx(Rng::derive(trial_seed, 3));
  Rng rng_ny(Rng::derive(trial_seed, 4));
  const siggen::SourceSeries nx = gen_noise(cfg.noise_kind, t_len, cfg.fs, rng_nx);
  const siggen::SourceSeries ny = gen_noise(cfg.noise_kind, t_len, cfg.fs, rng_ny);

  siggen::MixParams params;
  params.alpha = alpha;
  params.theta1 = cfg.theta();
  params.theta2 = cfg.theta();
  params.beta = 1;
  params.tau = tau;

  TrialMaterial material;
  material.tau = tau;
  material.pair = siggen::assemble_trial(signal, nx, ny, params);
  return material;
}

struct TrialOutcome {
  std::int64_t tau = 0;
  // per configured method
  std::vector<double> boot_mean;
  std::vector<std::uint8_t> accepted;
  std::vector<std::uint8_t> valid;
};

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult result;
  result.config = cfg;
  result.master_seed = cfg.master_seed;
  result.config_hash = config_hash(cfg);
  if (cfg.n_trial == 0) return result;

  const std::size_t max_lag = cfg.seg_len / 2 - 1;
  const std::size_t n_alpha = cfg.snr_grid.size();
  const std::size_t n_methods = cfg.methods.size();
  std::vector<TrialOutcome> outcomes(n_alpha * cfg.n_trial);

  parallel_for(n_alpha * cfg.n_trial, cfg.threads, [&](std::size_t job) {
    const std::size_t ai = job / cfg.n_trial;
    const std::size_t ti = job % cfg.n_trial;
    const std::uint64_t trial_seed = Rng::derive(cfg.master_seed, 0x747269616cULL, ai, ti);
    try {
      const TrialMaterial material = make_trial(cfg, cfg.snr_grid[ai], trial_seed, std::nullopt);
      const bootstrap::TrialCaches caches(material.pair, cfg.seg_len, cfg.methods, max_lag);
      const std::vector<bootstrap::BootstrapVerdict> verdicts = bootstrap::bootstrap_many(
          caches, cfg.methods, cfg.n_boot, cfg.ci_width, Rng::derive(trial_seed, 5));

      TrialOutcome& out = outcomes[job];
      out.tau = material.tau;
      out.boot_mean.resize(n_methods);
      out.accepted.resize(n_methods);
      out.valid.resize(n_methods);
      for (std::size_t mi = 0; mi < n_methods; ++mi) {
        out.boot_mean[mi] = verdicts[mi].valid ? verdicts[mi].mean
                                               : std::numeric_limits<double>::quiet_NaN();
        out.accepted[mi] = verdicts[mi].accepted ? 1 : 0;
        out.valid[mi] = verdicts[mi].valid ? 1 : 0;
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("trial " + std::to_string(ti) + " at alpha " +
                               format_double(cfg.snr_grid[ai]) + ": " + e.what());
    }
  });

  for (std::size_t mi = 0; mi < n_methods; ++mi) {
    for (std::size_t ai = 0; ai < n_alpha; ++ai) {
      double err_all = 0.0, err_accepted = 0.0;
      std::size_t n_all = 0, n_accepted = 0;
      for (std::size_t ti = 0; ti < cfg.n_trial; ++ti) {
        const TrialOutcome& out = outcomes[ai * cfg.n_trial + ti];
        if (!out.valid[mi]) continue;
        const double err =
            std::abs(static_cast<double>(out.tau) - out.boot_mean[mi]) * 1000.0 / cfg.fs;
        err_all += err;
        ++n_all;
        if (out.accepted[mi]) {
          err_accepted += err;
          ++n_accepted;
        }
      }
      ResultRow row;
      row.method = cfg.methods[mi];
      row.alpha = cfg.snr_grid[ai];
      row.mixed = cfg.mixed;
      row.mae_ms = n_all > 0 ? err_all / static_cast<double>(n_all)
                             : std::numeric_limits<double>::quiet_NaN();
      row.mae_ms_filtered = n_accepted > 0 ? err_accepted / static_cast<double>(n_accepted)
                                           : std::numeric_limits<double>::quiet_NaN();
      row.rejection_rate =
          1.0 - static_cast<double>(n_accepted) / static_cast<double>(cfg.n_trial);
      row.n_accepted = n_accepted;
      result.rows.push_back(row);
    }
  }
  return result;
}

BiasResult run_bias_sweep(const ExperimentConfig& cfg, std::size_t n_per_tau) {
  cfg.validate();
  if (n_per_tau == 0) throw std::invalid_argument("bias sweep: n_per_tau must be >= 1");

  BiasResult result;
  result.master_seed = cfg.master_seed;
  result.config_hash = config_hash(cfg);

  const std::size_t max_lag = cfg.seg_len / 2 - 1;
  const std::size_t n_tau = static_cast<std::size_t>(cfg.tau_max - cfg.tau_min + 1);
  const std::size_t n_methods = cfg.methods.size();

  struct SweepOutcome {
    std::int64_t tau = 0;
    std::vector<double> est;  // bootstrap means
    std::vector<std::uint8_t> defined;
  };

  for (std::size_t alpha_index = 0; alpha_index < cfg.snr_grid.size(); ++alpha_index) {
    const double alpha = cfg.snr_grid[alpha_index];
    std::vector<SweepOutcome> outcomes(n_tau * n_per_tau);
    parallel_for(n_tau * n_per_tau, cfg.threads, [&](std::size_t job) {
      const std::size_t taui = job / n_per_tau;
      const std::size_t ti = job % n_per_tau;
      const std::int64_t tau = cfg.tau_min + static_cast<std::int64_t>(taui);
      const std::uint64_t trial_seed =
          Rng::derive(cfg.master_seed, 0x62696173ULL + alpha_index, taui, ti);
      const TrialMaterial material = make_trial(cfg, alpha, trial_seed, tau);
      const bootstrap::TrialCaches caches(material.pair, cfg.seg_len, cfg.methods, max_lag);
      const auto verdicts = bootstrap::bootstrap_many(caches, cfg.methods, cfg.n_boot,
                                                      cfg.ci_width, Rng::derive(trial_seed, 5));
      SweepOutcome& out = outcomes[job];
      out.tau = tau;
      out.est.resize(n_methods, 0.0);
      out.defined.assign(n_methods, 0);
      for (std::size_t mi = 0; mi < n_methods; ++mi) {
        if (verdicts[mi].valid) {
          out.est[mi] = verdicts[mi].mean;
          out.defined[mi] = 1;
        }
      }
    });

    const double bound = static_cast<double>(cfg.seg_len) / 2.0;
    for (std::size_t mi = 0; mi < n_methods; ++mi) {
      std::vector<double> truths, ests;
      for (const SweepOutcome& out : outcomes) {
        if (!out.defined[mi]) continue;
        BiasRow row;
        row.method = cfg.methods[mi];
        row.alpha = alpha;
        row.mixed = cfg.mixed;
        row.tau_true = out.tau;
        row.tau_est = out.est[mi];
        result.rows.push_back(row);
        if (std::abs(static_cast<double>(out.tau)) <= bound) {
          truths.push_back(static_cast<double>(out.tau));
          ests.push_back(out.est[mi]);
        }
      }
      PccSummary summary;
      summary.method = cfg.methods[mi];
      summary.alpha = alpha;
      summary.mixed = cfg.mixed;
      summary.n = truths.size();
      if (truths.size() >= 3) {
        const PearsonResult pr = pearson(truths, ests);
        summary.r = pr.r;
        summary.p = pr.p;
        summary.dof = pr.dof;
        summary.defined = pr.defined;
      }
      result.pcc.push_back(summary);
    }
  }
  return result;
}

double mae(std::span<const double> truths_samples, std::span<const double> boot_means,
           double fs) {
  if (truths_samples.size() != boot_means.size())
    throw std::invalid_argument("mae: length mismatch");
  if (truths_samples.empty()) throw std::invalid_argument("mae: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < truths_samples.size(); ++i)
    acc += std::abs(truths_samples[i] - boot_means[i]);
  return acc / static_cast<double>(truths_samples.size()) * 1000.0 / fs;
}

namespace {

// continued fraction for the regularized incomplete beta (Lentz)
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x < 0.0 || x > 1.0) throw std::invalid_argument("incomplete_beta: x outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

PearsonResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 3) throw std::invalid_argument("pearson: need at least 3 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  PearsonResult out;
  out.dof = x.size() - 2;
  if (sxx <= 0.0 || syy <= 0.0) {
    out.defined = false;
    out.r = std::numeric_limits<double>::quiet_NaN();
    out.p = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.defined = true;
  out.r = sxy / std::sqrt(sxx * syy);
  if (out.r >= 1.0 || out.r <= -1.0) {
    out.r = out.r >= 1.0 ? 1.0 : -1.0;
    out.p = 0.0;
    return out;
  }
  const double dof = static_cast<double>(out.dof);
  const double t_sq = out.r * out.r * dof / (1.0 - out.r * out.r);
  out.p = incomplete_beta(dof / 2.0, 0.5, dof / (dof + t_sq));
  return out;
}

}  // namespace lagscope::harness
