#include "lagscope/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lagscope/rng.hpp"

namespace lagscope::bootstrap {

using estimators::DelayEstimate;
using spectral::Bispectrum;
using spectral::cplx;

double percentile(std::span<const double> sorted_values, double q) {
  if (sorted_values.empty()) throw std::invalid_argument("percentile: empty sample");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("percentile: q outside [0, 1]");
  const double pos = q * static_cast<double>(sorted_values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
  if (lo == hi) return sorted_values[lo];
  const double frac = pos - static_cast<double>(lo);
  return sorted_values[lo] * (1.0 - frac) + sorted_values[hi] * frac;
}

TrialCaches::TrialCaches(const siggen::TrialPair& pair, std::size_t seg_len,
                         std::span<const Method> methods, std::size_t max_lag,
                         bool keep_bispec_cache) {
  seg_len_ = seg_len;
  fs_ = pair.fs;

  bool need_corr = false, need_cross = false, need_psi = false;
  bool need_xyx = false, need_yyy = false, need_yxx = false;
  for (Method m : methods) {
    switch (m) {
      case Method::crosscorr: need_corr = true; break;
      case Method::phase_slope: need_cross = true; break;
      case Method::phase_periodicity: need_cross = need_psi = true; break;
      default:
        need_xyx = true;
        if (estimators::is_antisym(m)) need_yxx = true;
        {
          const auto pm = estimators::panel_of(m);
          if (pm == estimators::PanelMethod::m2 || pm == estimators::PanelMethod::m4)
            need_yyy = true;
        }
        break;
    }
  }

  const spectral::SpectralFrames fx = spectral::make_frames(pair.x_obs, seg_len, pair.fs);
  const spectral::SpectralFrames fy = spectral::make_frames(pair.y_obs, seg_len, pair.fs);
  n_segments_ = fx.n_segments;

  if (need_cross || need_psi) {
    has_cross_ = true;
    const std::size_t total = fx.n_segments * seg_len;
    sxy_.resize(total);
    sxx_.resize(total);
    syy_.resize(total);
    for (std::size_t s = 0; s < fx.n_segments; ++s) {
      const cplx* a = fx.coeffs.data() + s * seg_len;
      const cplx* b = fy.coeffs.data() + s * seg_len;
      for (std::size_t k = 0; k < seg_len; ++k) {
        sxy_[s * seg_len + k] = a[k] * std::conj(b[k]);
        sxx_[s * seg_len + k] = a[k] * std::conj(a[k]);
        syy_[s * seg_len + k] = b[k] * std::conj(b[k]);
      }
    }
  }
  if (need_corr) {
    has_corr_ = true;
    corr_ = estimators::correlogram(pair.x_obs, pair.y_obs, seg_len, max_lag);
  }
  if (need_xyx) {
    b_xyx_ = spectral::bispectrum(fx, fy, fx, spectral::Triple::xyx, keep_bispec_cache);
    b_xxx_ = spectral::bispectrum(fx, fx, fx, spectral::Triple::xxx, keep_bispec_cache);
    if (need_yxx)
      b_yxx_ = spectral::bispectrum(fy, fx, fx, spectral::Triple::yxx, keep_bispec_cache);
    if (need_yyy)
      b_yyy_ = spectral::bispectrum(fy, fy, fy, spectral::Triple::yyy, keep_bispec_cache);
  }
}

spectral::CrossSpectrum TrialCaches::average_cross(const std::vector<cplx>& per_segment,
                                                   std::span<const std::uint32_t> counts) const {
  spectral::CrossSpectrum out;
  out.n_segments = n_segments_;
  out.values.assign(seg_len_, cplx(0.0, 0.0));
  // fixed segment order keeps the reduction bit-stable
  for (std::size_t s = 0; s < n_segments_; ++s) {
    if (counts[s] == 0) continue;
    const double w = static_cast<double>(counts[s]);
    const cplx* row = per_segment.data() + s * seg_len_;
    for (std::size_t k = 0; k < seg_len_; ++k) out.values[k] += w * row[k];
  }
  const double inv = 1.0 / static_cast<double>(n_segments_);
  for (auto& v : out.values) v *= inv;
  return out;
}

Bispectrum TrialCaches::average_bispectrum(const Bispectrum& cached,
                                           std::span<const std::uint32_t> counts) const {
  if (!cached.has_cache())
    throw std::logic_error("TrialCaches: per-segment bispectrum cache was not kept");
  const std::size_t mm = cached.size * cached.size;
  Bispectrum out;
  out.size = cached.size;
  out.n_segments = cached.n_segments;
  out.triple = cached.triple;
  out.values.assign(mm, cplx(0.0, 0.0));
  // flat real/imag view of the interleaved complex storage; this is the hot
  // loop of the bispectral bootstrap and vectorizes as written
  double* acc = reinterpret_cast<double*>(out.values.data());
  const std::size_t n_flat = 2 * mm;
  for (std::size_t s = 0; s < cached.n_segments; ++s) {
    if (counts[s] == 0) continue;
    const float* row = reinterpret_cast<const float*>(cached.per_segment.data() + s * mm);
    if (counts[s] == 1) {
      for (std::size_t j = 0; j < n_flat; ++j) acc[j] += static_cast<double>(row[j]);
    } else {
      const double w = static_cast<double>(counts[s]);
      for (std::size_t j = 0; j < n_flat; ++j) acc[j] += w * static_cast<double>(row[j]);
    }
  }
  const double inv = 1.0 / static_cast<double>(cached.n_segments);
  for (auto& v : out.values) v *= inv;
  return out;
}

std::vector<std::optional<DelayEstimate>> TrialCaches::estimate_many(
    std::span<const Method> methods, std::span<const std::uint32_t> counts) const {
  bool need_corr = false, need_cross = false, need_psi = false;
  bool need_bisp = false, need_yyy = false, need_yxx = false;
  for (Method m : methods) {
    switch (m) {
      case Method::crosscorr: need_corr = true; break;
      case Method::phase_slope: need_cross = true; break;
      case Method::phase_periodicity: need_cross = need_psi = true; break;
      default: {
        need_bisp = true;
        if (estimators::is_antisym(m)) need_yxx = true;
        const auto pm = estimators::panel_of(m);
        if (pm == estimators::PanelMethod::m2 || pm == estimators::PanelMethod::m4)
          need_yyy = true;
        break;
      }
    }
  }

  // shared averaged components for this resample
  std::vector<double> corr_mean;
  if (need_corr) {
    if (!has_corr_) throw std::logic_error("TrialCaches: correlogram not cached");
    corr_mean.assign(corr_.n_lags(), 0.0);
    for (std::size_t s = 0; s < n_segments_; ++s) {
      if (counts[s] == 0) continue;
      const double w = static_cast<double>(counts[s]);
      const double* row = corr_.per_segment.data() + s * corr_.n_lags();
      for (std::size_t i = 0; i < corr_mean.size(); ++i) corr_mean[i] += w * row[i];
    }
    const double inv = 1.0 / static_cast<double>(n_segments_);
    for (double& v : corr_mean) v *= inv;
  }

  std::optional<spectral::CrossSpectrum> sxy;
  std::optional<spectral::PhaseSpectrum> phase;
  double psi_value = 0.0;
  if (need_cross) {
    if (!has_cross_) throw std::logic_error("TrialCaches: cross products not cached");
    sxy = average_cross(sxy_, counts);
    phase = spectral::phase_spectrum(*sxy);
  }
  if (need_psi) {
    const auto sxx = average_cross(sxx_, counts);
    const auto syy = average_cross(syy_, counts);
    spectral::Coherency coh;
    coh.values.resize(seg_len_);
    coh.defined.resize(seg_len_);
    for (std::size_t k = 0; k < seg_len_; ++k) {
      const double denom_sq = sxx.values[k].real() * syy.values[k].real();
      if (denom_sq > 0.0) {
        coh.values[k] = sxy->values[k] / std::sqrt(denom_sq);
        coh.defined[k] = 1;
      } else {
        coh.values[k] = cplx(0.0, 0.0);
        coh.defined[k] = 0;
      }
    }
    psi_value = spectral::psi(coh);
  }

  std::optional<Bispectrum> xyx, xxx, yyy, yxx;
  if (need_bisp) {
    if (!b_xyx_) throw std::logic_error("TrialCaches: bispectra not cached");
    xyx = average_bispectrum(*b_xyx_, counts);
    xxx = average_bispectrum(*b_xxx_, counts);
    if (need_yyy) {
      if (!b_yyy_) throw std::logic_error("TrialCaches: B_YYY not cached");
      yyy = average_bispectrum(*b_yyy_, counts);
    }
    if (need_yxx) {
      if (!b_yxx_) throw std::logic_error("TrialCaches: B_YXX not cached");
      yxx = average_bispectrum(*b_yxx_, counts);
    }
  }

  std::vector<std::optional<DelayEstimate>> out(methods.size());
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const Method m = methods[mi];
    try {
      switch (m) {
        case Method::crosscorr:
          out[mi] = estimators::crosscorr_from_mean(corr_mean, corr_.max_lag, fs_);
          break;
        case Method::phase_slope:
          out[mi] = estimators::tde_phase_slope(*phase, fs_);
          break;
        case Method::phase_periodicity:
          out[mi] = estimators::tde_phase_periodicity(*phase, psi_value, fs_);
          break;
        default: {
          const bool antisym = estimators::is_antisym(m);
          const auto pm = estimators::panel_of(m);
          const estimators::Panel p =
              estimators::panel(pm, *xyx, *xxx, yyy ? &*yyy : nullptr, antisym,
                                yxx ? &*yxx : nullptr);
          const auto [lag, value] = estimators::hologram_argmax(estimators::hologram(p));
          DelayEstimate est;
          est.method = m;
          est.lag_samples = lag;
          est.lag_seconds = fs_ > 0.0 ? static_cast<double>(lag) / fs_ : 0.0;
          est.peak_value = value;
          out[mi] = est;
          break;
        }
      }
    } catch (const estimators::undefined_estimate&) {
      out[mi] = std::nullopt;
    }
  }
  return out;
}

DelayEstimate TrialCaches::estimate(Method m, std::span<const std::uint32_t> counts) const {
  const Method methods[] = {m};
  const auto results = estimate_many(methods, counts);
  if (!results.front())
    throw estimators::undefined_estimate("estimate undefined for " +
                                         estimators::method_name(m));
  return *results.front();
}

DelayEstimate TrialCaches::estimate(Method m) const {
  if (estimators::is_bispectral(m)) {
    // full-sample means are already stored; no cache pass needed
    if (!b_xyx_) throw std::logic_error("TrialCaches: bispectra not cached");
    const bool antisym = estimators::is_antisym(m);
    const auto pm = estimators::panel_of(m);
    const estimators::Panel p =
        estimators::panel(pm, *b_xyx_, *b_xxx_, b_yyy_ ? &*b_yyy_ : nullptr, antisym,
                          b_yxx_ ? &*b_yxx_ : nullptr);
    const estimators::Hologram h = estimators::hologram(p);
    const auto [lag, value] = estimators::hologram_argmax(h);
    DelayEstimate est;
    est.method = m;
    est.lag_samples = lag;
    est.lag_seconds = fs_ > 0.0 ? static_cast<double>(lag) / fs_ : 0.0;
    est.peak_value = value;
    return est;
  }
  const std::vector<std::uint32_t> ones(n_segments_, 1);
  return estimate(m, ones);
}

namespace {

BootstrapVerdict summarize(std::vector<double> estimates, std::size_t n_boot, double width,
                           std::size_t n_undefined) {
  BootstrapVerdict v;
  v.width = width;
  v.n_undefined = n_undefined;
  v.valid = n_undefined * 2 <= n_boot && !estimates.empty();
  v.estimates = std::move(estimates);
  if (!v.valid) return v;

  double sum = 0.0;
  for (double e : v.estimates) sum += e;
  v.mean = sum / static_cast<double>(v.estimates.size());

  std::vector<double> sorted = v.estimates;
  std::sort(sorted.begin(), sorted.end());
  v.median = percentile(sorted, 0.5);
  v.iqr = percentile(sorted, 0.75) - percentile(sorted, 0.25);
  const double tail = (1.0 - width) / 2.0;
  v.ci_low = percentile(sorted, tail);
  v.ci_high = percentile(sorted, 1.0 - tail);
  v.accepted = v.ci_low > 0.0 || v.ci_high < 0.0;
  return v;
}

}  // namespace

std::vector<BootstrapVerdict> bootstrap_many(const TrialCaches& caches,
                                             std::span<const Method> methods,
                                             std::size_t n_boot, double width,
                                             std::uint64_t seed) {
  if (caches.n_segments() < 2) throw std::invalid_argument("bootstrap: need >= 2 segments");
  if (!(width > 0.0 && width < 1.0)) throw std::invalid_argument("bootstrap: width outside (0, 1)");

  const std::size_t n_seg = caches.n_segments();
  std::vector<std::vector<double>> estimates(methods.size());
  std::vector<std::size_t> undefined(methods.size(), 0);
  for (auto& e : estimates) e.reserve(n_boot);

  std::vector<std::uint32_t> counts(n_seg);
  for (std::size_t iter = 0; iter < n_boot; ++iter) {
    Rng rng(Rng::derive(seed, 0x626f6f74ULL, iter));
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t draw = 0; draw < n_seg; ++draw)
      ++counts[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n_seg) - 1))];

    const auto results = caches.estimate_many(methods, counts);
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      if (results[mi])
        estimates[mi].push_back(static_cast<double>(results[mi]->lag_samples));
      else
        ++undefined[mi];
    }
  }

  std::vector<BootstrapVerdict> verdicts;
  verdicts.reserve(methods.size());
  for (std::size_t mi = 0; mi < methods.size(); ++mi)
    verdicts.push_back(summarize(std::move(estimates[mi]), n_boot, width, undefined[mi]));
  return verdicts;
}

BootstrapVerdict bootstrap_tde(const TrialCaches& caches, Method method, std::size_t n_boot,
                               double width, std::uint64_t seed) {
  const Method methods[] = {method};
  return bootstrap_many(caches, methods, n_boot, width, seed).front();
}

}  // namespace lagscope::bootstrap
