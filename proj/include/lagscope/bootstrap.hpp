#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lagscope/estimators.hpp"
#include "lagscope/siggen.hpp"
#include "lagscope/spectral.hpp"

namespace lagscope::bootstrap {

using estimators::Method;

struct BootstrapVerdict {
  std::vector<double> estimates;  // defined iterations only, signed samples
  double mean = 0.0;
  double median = 0.0;
  double iqr = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double width = 0.0;
  bool accepted = false;
  // false when more than half the iterations were undefined; accepted is then
  // forced false and the summary statistics are meaningless
  bool valid = false;
  std::size_t n_undefined = 0;
};

// Linear-interpolation empirical quantile at position q (n - 1).
double percentile(std::span<const double> sorted_values, double q);

// Everything segment resampling needs, precomputed once per trial: the raw
// per-segment quantities each estimator is an average of. Resampled estimates
// then cost only weighted averages instead of fresh DFTs.
class TrialCaches {
public:
  // keep_bispec_cache = false builds a raw-estimate-only cache set (no
  // per-segment bispectra, so counted resampling of bispectral methods is
  // unavailable but memory stays small).
  TrialCaches(const siggen::TrialPair& pair, std::size_t seg_len,
              std::span<const Method> methods, std::size_t max_lag,
              bool keep_bispec_cache = true);

  std::size_t n_segments() const { return n_segments_; }
  std::size_t seg_len() const { return seg_len_; }
  double fs() const { return fs_; }

  // Estimate with the given per-segment multiplicities (sum = n_segments).
  // Throws estimators::undefined_estimate like the plain estimators do.
  estimators::DelayEstimate estimate(Method m, std::span<const std::uint32_t> counts) const;

  // Full-sample estimate (all multiplicities 1).
  estimators::DelayEstimate estimate(Method m) const;

  // One resample, several methods: averaged spectra and bispectra are shared
  // across the methods that need them. Undefined estimators yield nullopt.
  std::vector<std::optional<estimators::DelayEstimate>> estimate_many(
      std::span<const Method> methods, std::span<const std::uint32_t> counts) const;

private:
  bool has_cross_ = false;
  bool has_corr_ = false;
  std::size_t seg_len_ = 0;
  std::size_t n_segments_ = 0;
  double fs_ = 0.0;

  // per-segment cross products, n_segments x seg_len
  std::vector<spectral::cplx> sxy_, sxx_, syy_;
  estimators::Correlogram corr_;
  std::optional<spectral::Bispectrum> b_xyx_, b_xxx_, b_yyy_, b_yxx_;

  spectral::CrossSpectrum average_cross(const std::vector<spectral::cplx>& per_segment,
                                        std::span<const std::uint32_t> counts) const;
  spectral::Bispectrum average_bispectrum(const spectral::Bispectrum& cached,
                                          std::span<const std::uint32_t> counts) const;
};

// Resample segments with replacement n_boot times, re-estimate from the
// caches, and test the percentile CI against the zero-delay null. Iterations
// are seeded by counter so the verdict does not depend on scheduling.
BootstrapVerdict bootstrap_tde(const TrialCaches& caches, Method method, std::size_t n_boot,
                               double width, std::uint64_t seed);

// One shared resampling pass for several methods; column m equals
// bootstrap_tde(caches, m, ...) for the same seed.
std::vector<BootstrapVerdict> bootstrap_many(const TrialCaches& caches,
                                             std::span<const Method> methods,
                                             std::size_t n_boot, double width,
                                             std::uint64_t seed);

}  // namespace lagscope::bootstrap
