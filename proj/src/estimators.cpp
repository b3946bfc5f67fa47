#include "lagscope/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "lagscope/fft.hpp"

namespace lagscope::estimators {

using std::numbers::pi;

std::string method_name(Method m) {
  switch (m) {
    case Method::crosscorr: return "crosscorr";
    case Method::phase_slope: return "phase_slope";
    case Method::phase_periodicity: return "phase_periodicity";
    case Method::bispec_m1: return "bispec_m1";
    case Method::bispec_m2: return "bispec_m2";
    case Method::bispec_m3: return "bispec_m3";
    case Method::bispec_m4: return "bispec_m4";
    case Method::asb_m1: return "asb_m1";
    case Method::asb_m2: return "asb_m2";
    case Method::asb_m3: return "asb_m3";
    case Method::asb_m4: return "asb_m4";
  }
  return "unknown";
}

std::optional<Method> method_from_name(const std::string& name) {
  static const Method all[] = {
      Method::crosscorr, Method::phase_slope, Method::phase_periodicity,
      Method::bispec_m1, Method::bispec_m2,   Method::bispec_m3,
      Method::bispec_m4, Method::asb_m1,      Method::asb_m2,
      Method::asb_m3,    Method::asb_m4,
  };
  for (Method m : all)
    if (method_name(m) == name) return m;
  return std::nullopt;
}

bool is_bispectral(Method m) {
  return m != Method::crosscorr && m != Method::phase_slope && m != Method::phase_periodicity;
}

PanelMethod panel_of(Method m) {
  switch (m) {
    case Method::bispec_m1: case Method::asb_m1: return PanelMethod::m1;
    case Method::bispec_m2: case Method::asb_m2: return PanelMethod::m2;
    case Method::bispec_m3: case Method::asb_m3: return PanelMethod::m3;
    case Method::bispec_m4: case Method::asb_m4: return PanelMethod::m4;
    default: throw std::invalid_argument("panel_of: not a bispectral method");
  }
}

bool is_antisym(Method m) {
  return m == Method::asb_m1 || m == Method::asb_m2 || m == Method::asb_m3 ||
         m == Method::asb_m4;
}

Method bispec_method(PanelMethod panel, bool antisym) {
  switch (panel) {
    case PanelMethod::m1: return antisym ? Method::asb_m1 : Method::bispec_m1;
    case PanelMethod::m2: return antisym ? Method::asb_m2 : Method::bispec_m2;
    case PanelMethod::m3: return antisym ? Method::asb_m3 : Method::bispec_m3;
    case PanelMethod::m4: return antisym ? Method::asb_m4 : Method::bispec_m4;
  }
  return Method::bispec_m1;
}

std::int64_t circular_lag(std::size_t index, std::size_t m) {
  const std::int64_t half = static_cast<std::int64_t>(m / 2);
  const std::int64_t i = static_cast<std::int64_t>(index);
  return i < half ? i : i - static_cast<std::int64_t>(m);
}

namespace {

double wrap_angle(double a) {
  // principal value in [-pi, pi)
  return a - 2.0 * pi * std::floor(a / (2.0 * pi) + 0.5);
}

// lexicographic preference: larger value, then smaller |lag|, then negative lag
bool better_peak(double value, std::int64_t lag, double best_value, std::int64_t best_lag) {
  if (value != best_value) return value > best_value;
  if (std::llabs(lag) != std::llabs(best_lag)) return std::llabs(lag) < std::llabs(best_lag);
  return lag < best_lag;
}

}  // namespace

std::vector<double> Correlogram::mean() const {
  std::vector<double> out(n_lags(), 0.0);
  for (std::size_t s = 0; s < n_segments; ++s) {
    const double* row = per_segment.data() + s * n_lags();
    for (std::size_t i = 0; i < n_lags(); ++i) out[i] += row[i];
  }
  const double inv = 1.0 / static_cast<double>(n_segments);
  for (double& v : out) v *= inv;
  return out;
}

Correlogram correlogram(std::span<const double> x, std::span<const double> y,
                        std::size_t seg_len, std::size_t max_lag) {
  if (max_lag >= seg_len) throw std::invalid_argument("correlogram: max_lag >= segment length");
  if (x.size() != y.size()) throw std::invalid_argument("correlogram: unequal channel lengths");
  const std::size_t n = x.size() / seg_len;
  if (n < 1) throw std::invalid_argument("correlogram: series shorter than one segment");

  const std::int64_t lag = static_cast<std::int64_t>(max_lag);
  const std::int64_t m = static_cast<std::int64_t>(seg_len);
  Correlogram c;
  c.n_segments = n;
  c.max_lag = lag;
  c.per_segment.assign(n * c.n_lags(), 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const double* xs = x.data() + s * seg_len;
    const double* ys = y.data() + s * seg_len;
    double* row = c.per_segment.data() + s * c.n_lags();
    for (std::int64_t rho = -lag; rho <= lag; ++rho) {
      const std::int64_t t0 = std::max<std::int64_t>(0, -rho);
      const std::int64_t t1 = std::min<std::int64_t>(m, m - rho);
      double acc = 0.0;
      for (std::int64_t t = t0; t < t1; ++t) acc += xs[t] * ys[t + rho];
      row[rho + lag] = acc / static_cast<double>(m);
    }
  }
  return c;
}

DelayEstimate crosscorr_from_mean(std::span<const double> mean_r, std::int64_t max_lag, double fs) {
  double max_abs = 0.0;
  for (double v : mean_r) max_abs = std::max(max_abs, std::abs(v));
  if (max_abs == 0.0) throw undefined_estimate("crosscorr: flat correlogram");

  std::int64_t best_lag = 0;
  double best_value = -1.0;
  for (std::size_t i = 0; i < mean_r.size(); ++i) {
    const std::int64_t rho = static_cast<std::int64_t>(i) - max_lag;
    const double v = std::abs(mean_r[i]);
    if (better_peak(v, rho, best_value, best_lag)) {
      best_value = v;
      best_lag = rho;
    }
  }
  DelayEstimate est;
  est.method = Method::crosscorr;
  est.lag_samples = best_lag;
  est.lag_seconds = fs > 0.0 ? static_cast<double>(best_lag) / fs : 0.0;
  est.peak_value = best_value;
  return est;
}

DelayEstimate tde_crosscorr(const TrialPair& pair, std::size_t seg_len, std::size_t max_lag) {
  auto is_constant = [](std::span<const double> v) {
    for (double s : v)
      if (s != v.front()) return false;
    return true;
  };
  if (is_constant(pair.x_obs) || is_constant(pair.y_obs))
    throw undefined_estimate("crosscorr: constant channel");
  const Correlogram c = correlogram(pair.x_obs, pair.y_obs, seg_len, max_lag);
  const std::vector<double> r = c.mean();
  return crosscorr_from_mean(r, c.max_lag, pair.fs);
}

DelayEstimate tde_phase_slope(const PhaseSpectrum& p, double fs) {
  if (p.defined_count() < 8) throw undefined_estimate("phase_slope: fewer than 8 defined bins");
  const std::size_t m = p.values.size();
  const std::int64_t half = static_cast<std::int64_t>(m / 2);

  std::int64_t best_d = 0;
  double best_res = std::numeric_limits<double>::infinity();
  for (std::int64_t d = -half; d < half; ++d) {
    const double slope = 2.0 * pi * static_cast<double>(d) / static_cast<double>(m);
    double res = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      if (!p.defined[k]) continue;
      const double w = wrap_angle(p.values[k] - slope * static_cast<double>(k));
      res += w * w;
    }
    const bool better =
        res < best_res ||
        (res == best_res && (std::llabs(d) < std::llabs(best_d) ||
                             (std::llabs(d) == std::llabs(best_d) && d < best_d)));
    if (better) {
      best_res = res;
      best_d = d;
    }
  }
  DelayEstimate est;
  est.method = Method::phase_slope;
  est.lag_samples = best_d;
  est.lag_seconds = fs > 0.0 ? static_cast<double>(best_d) / fs : 0.0;
  est.peak_value = best_res;
  return est;
}

DelayEstimate tde_phase_periodicity(const PhaseSpectrum& p, double psi_value, double fs) {
  if (p.defined_count() < 8)
    throw undefined_estimate("phase_periodicity: fewer than 8 defined bins");
  const std::size_t m = p.values.size();
  std::vector<double> masked(m);
  for (std::size_t k = 0; k < m; ++k) masked[k] = p.defined[k] ? p.values[k] : 0.0;
  const std::vector<cplx> spec = fft::forward_real(masked);

  std::size_t best_t = 1;
  double best_mag = -1.0;
  for (std::size_t t = 1; t <= m / 2; ++t) {
    const double mag = std::abs(spec[t]);
    if (mag > best_mag) {
      best_mag = mag;
      best_t = t;
    }
  }
  const int sign = psi_value > 0.0 ? 1 : (psi_value < 0.0 ? -1 : 0);
  DelayEstimate est;
  est.method = Method::phase_periodicity;
  est.lag_samples = sign * static_cast<std::int64_t>(best_t);
  est.lag_seconds = fs > 0.0 ? static_cast<double>(est.lag_samples) / fs : 0.0;
  est.peak_value = best_mag;
  est.psi_sign = sign;
  return est;
}

namespace {

// unit phasor of z; zero entries carry phase 0 (atan2 convention)
inline cplx unit_phasor(const cplx& z) {
  const double mag = std::abs(z);
  return mag > 0.0 ? z / mag : cplx(1.0, 0.0);
}

double median_magnitude(const std::vector<cplx>& values) {
  std::vector<double> mags(values.size());
  for (std::size_t j = 0; j < values.size(); ++j) mags[j] = std::abs(values[j]);
  const std::size_t mid = mags.size() / 2;
  std::nth_element(mags.begin(), mags.begin() + mid, mags.end());
  return mags[mid];
}

constexpr double kDenominatorGuard = 1e-8;

}  // namespace

Panel panel(PanelMethod method, const Bispectrum& b_xyx, const Bispectrum& b_xxx,
            const Bispectrum* b_yyy, bool antisym, const Bispectrum* b_yxx) {
  if (b_xyx.size != b_xxx.size) throw std::invalid_argument("panel: bispectra mismatch");
  if (antisym && b_yxx == nullptr)
    throw std::invalid_argument("panel: antisym requires B_YXX");
  const bool needs_yyy = method == PanelMethod::m2 || method == PanelMethod::m4;
  if (needs_yyy && b_yyy == nullptr)
    throw std::invalid_argument("panel: M2/M4 require B_YYY");
  if (antisym && b_yxx->size != b_xyx.size)
    throw std::invalid_argument("panel: bispectra mismatch");
  if (needs_yyy && b_yyy->size != b_xyx.size)
    throw std::invalid_argument("panel: bispectra mismatch");

  const std::size_t mm = b_xyx.values.size();
  std::vector<cplx> numer(mm);
  if (antisym) {
    for (std::size_t j = 0; j < mm; ++j) numer[j] = b_xyx.values[j] - b_yxx->values[j];
  } else {
    numer = b_xyx.values;
  }

  Panel out;
  out.size = b_xyx.size;
  out.method = method;
  out.antisym = antisym;
  out.values.resize(mm);

  switch (method) {
    case PanelMethod::m1:
      // exp(i(angle(B_XYX) - angle(B_XXX))) without trigonometry
      for (std::size_t j = 0; j < mm; ++j)
        out.values[j] = unit_phasor(numer[j]) * std::conj(unit_phasor(b_xxx.values[j]));
      break;
    case PanelMethod::m2:
      for (std::size_t j = 0; j < mm; ++j) {
        const double ang = std::arg(numer[j]) -
                           0.5 * (std::arg(b_xxx.values[j]) + std::arg(b_yyy->values[j]));
        out.values[j] = std::polar(1.0, ang);
      }
      break;
    case PanelMethod::m3: {
      const double guard = kDenominatorGuard * median_magnitude(b_xxx.values);
      for (std::size_t j = 0; j < mm; ++j) {
        if (std::abs(b_xxx.values[j]) < guard) {
          out.values[j] = cplx(0.0, 0.0);
          ++out.n_guarded;
        } else {
          out.values[j] = numer[j] / b_xxx.values[j];
        }
      }
      break;
    }
    case PanelMethod::m4: {
      std::vector<double> denom(mm);
      for (std::size_t j = 0; j < mm; ++j)
        denom[j] = std::sqrt(std::abs(b_xxx.values[j]) * std::abs(b_yyy->values[j]));
      std::vector<double> sorted = denom;
      const std::size_t mid = sorted.size() / 2;
      std::nth_element(sorted.begin(), sorted.begin() + mid, sorted.end());
      const double guard = kDenominatorGuard * sorted[mid];
      for (std::size_t j = 0; j < mm; ++j) {
        if (denom[j] < guard) {
          out.values[j] = cplx(0.0, 0.0);
          ++out.n_guarded;
          continue;
        }
        const double ang = std::arg(numer[j]) -
                           0.5 * (std::arg(b_xxx.values[j]) + std::arg(b_yyy->values[j]));
        out.values[j] = std::polar(std::abs(numer[j]) / denom[j], ang);
      }
      break;
    }
  }
  return out;
}

Hologram hologram(const Panel& p) {
  const std::size_t m = p.size;
  std::vector<cplx> summed(m, cplx(0.0, 0.0));
  for (std::size_t f1 = 0; f1 < m; ++f1) {
    const cplx* row = p.values.data() + f1 * m;
    for (std::size_t f2 = 0; f2 < m; ++f2) summed[f2] += row[f2];
  }
  const std::vector<cplx> lagged = fft::inverse(summed);
  Hologram h;
  h.method = p.method;
  h.antisym = p.antisym;
  h.values.resize(m);
  for (std::size_t i = 0; i < m; ++i) h.values[i] = lagged[i].real();
  return h;
}

std::pair<std::int64_t, double> hologram_argmax(const Hologram& h) {
  const std::size_t m = h.values.size();
  std::int64_t best_lag = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    const std::int64_t lag = circular_lag(i, m);
    if (better_peak(h.values[i], lag, best_value, best_lag)) {
      best_value = h.values[i];
      best_lag = lag;
    }
  }
  return {best_lag, best_value};
}

DelayEstimate tde_bispec(const TrialPair& pair, std::size_t seg_len, PanelMethod method,
                         bool antisym) {
  const spectral::SpectralFrames fx = spectral::make_frames(pair.x_obs, seg_len, pair.fs);
  const spectral::SpectralFrames fy = spectral::make_frames(pair.y_obs, seg_len, pair.fs);

  const Bispectrum b_xyx = spectral::bispectrum(fx, fy, fx, spectral::Triple::xyx, false);
  const Bispectrum b_xxx = spectral::bispectrum(fx, fx, fx, spectral::Triple::xxx, false);
  std::optional<Bispectrum> b_yyy;
  if (method == PanelMethod::m2 || method == PanelMethod::m4)
    b_yyy = spectral::bispectrum(fy, fy, fy, spectral::Triple::yyy, false);
  std::optional<Bispectrum> b_yxx;
  if (antisym) b_yxx = spectral::bispectrum(fy, fx, fx, spectral::Triple::yxx, false);

  const Panel p = panel(method, b_xyx, b_xxx, b_yyy ? &*b_yyy : nullptr, antisym,
                        b_yxx ? &*b_yxx : nullptr);
  const Hologram h = hologram(p);
  const auto [lag, value] = hologram_argmax(h);

  DelayEstimate est;
  est.method = bispec_method(method, antisym);
  est.lag_samples = lag;
  est.lag_seconds = pair.fs > 0.0 ? static_cast<double>(lag) / pair.fs : 0.0;
  est.peak_value = value;
  return est;
}

BandwidthRequirement min_bandwidth_for_delay(std::int64_t tau_samples, std::size_t m_f) {
  if (tau_samples == 0) throw std::invalid_argument("min_bandwidth_for_delay: tau must be nonzero");
  const double bins = 2.0 * static_cast<double>(m_f) / std::abs(static_cast<double>(tau_samples));
  BandwidthRequirement req;
  req.bins = static_cast<std::size_t>(std::ceil(bins));
  req.resolvable = req.bins <= m_f;
  return req;
}

}  // namespace lagscope::estimators
