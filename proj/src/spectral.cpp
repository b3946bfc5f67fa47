#include "lagscope/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "lagscope/fft.hpp"

namespace lagscope::spectral {

using std::numbers::pi;

namespace {

// Frozen by the noiseless-delay oracle: the raw imaginary sum of
// C(f) conj(C(f+1)) is negative for positive tau, so flip it once here.
constexpr double kPsiSignCalibration = -1.0;

constexpr double kUndefinedPhaseTolerance = 1e-12;

}  // namespace

std::vector<std::vector<double>> segment(std::span<const double> series, std::size_t seg_len) {
  if (seg_len == 0) throw std::invalid_argument("segment: seg_len must be positive");
  const std::size_t n = series.size() / seg_len;
  if (n < 2) throw std::invalid_argument("segment: need at least 2 full segments");
  std::vector<std::vector<double>> out(n);
  for (std::size_t s = 0; s < n; ++s)
    out[s].assign(series.begin() + s * seg_len, series.begin() + (s + 1) * seg_len);
  return out;
}

SpectralFrames fft_frames(const std::vector<std::vector<double>>& segments, double fs) {
  if (segments.empty()) throw std::invalid_argument("fft_frames: no segments");
  const std::size_t m = segments.front().size();
  SpectralFrames frames;
  frames.fs = fs;
  frames.seg_len = m;
  frames.n_segments = segments.size();
  frames.coeffs.resize(segments.size() * m);
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (segments[s].size() != m) throw std::invalid_argument("fft_frames: unequal segment lengths");
    const std::vector<cplx> spec = fft::forward_real(segments[s]);
    std::copy(spec.begin(), spec.end(), frames.coeffs.begin() + s * m);
  }
  return frames;
}

SpectralFrames make_frames(std::span<const double> series, std::size_t seg_len, double fs) {
  return fft_frames(segment(series, seg_len), fs);
}

CrossSpectrum cross_spectrum(const SpectralFrames& fx, const SpectralFrames& fy) {
  if (fx.seg_len != fy.seg_len || fx.n_segments != fy.n_segments)
    throw std::invalid_argument("cross_spectrum: frame shape mismatch");
  const std::size_t m = fx.seg_len;
  CrossSpectrum s;
  s.n_segments = fx.n_segments;
  s.values.assign(m, cplx(0.0, 0.0));
  for (std::size_t seg = 0; seg < fx.n_segments; ++seg) {
    const cplx* a = fx.coeffs.data() + seg * m;
    const cplx* b = fy.coeffs.data() + seg * m;
    for (std::size_t k = 0; k < m; ++k) s.values[k] += a[k] * std::conj(b[k]);
  }
  const double inv_n = 1.0 / static_cast<double>(fx.n_segments);
  for (auto& v : s.values) v *= inv_n;
  return s;
}

std::size_t PhaseSpectrum::defined_count() const {
  std::size_t n = 0;
  for (auto d : defined) n += d;
  return n;
}

PhaseSpectrum phase_spectrum(const CrossSpectrum& s) {
  PhaseSpectrum p;
  p.values.resize(s.values.size());
  p.defined.resize(s.values.size());
  double total = 0.0;
  for (const cplx& v : s.values) total += std::abs(v);
  const double tol = kUndefinedPhaseTolerance * total;
  for (std::size_t k = 0; k < s.values.size(); ++k) {
    const double mag = std::abs(s.values[k]);
    p.defined[k] = mag > tol ? 1 : 0;
    p.values[k] = std::atan2(s.values[k].imag(), s.values[k].real());
  }
  return p;
}

Coherency coherency(const SpectralFrames& fx, const SpectralFrames& fy) {
  const CrossSpectrum sxy = cross_spectrum(fx, fy);
  const CrossSpectrum sxx = cross_spectrum(fx, fx);
  const CrossSpectrum syy = cross_spectrum(fy, fy);
  Coherency c;
  c.values.resize(sxy.values.size());
  c.defined.resize(sxy.values.size());
  for (std::size_t k = 0; k < sxy.values.size(); ++k) {
    const double denom_sq = sxx.values[k].real() * syy.values[k].real();
    if (denom_sq > 0.0) {
      c.values[k] = sxy.values[k] / std::sqrt(denom_sq);
      c.defined[k] = 1;
    } else {
      c.values[k] = cplx(0.0, 0.0);
      c.defined[k] = 0;
    }
  }
  return c;
}

double psi(const Coherency& c, BinRange band) {
  if (band.last >= c.values.size()) throw std::invalid_argument("psi: band outside spectrum");
  if (band.last < band.first + 1) throw std::invalid_argument("psi: band narrower than 2 bins");
  double imag_sum = 0.0;
  for (std::size_t k = band.first; k < band.last; ++k) {
    if (!c.defined[k] || !c.defined[k + 1]) continue;
    imag_sum += (c.values[k] * std::conj(c.values[k + 1])).imag();
  }
  return kPsiSignCalibration * imag_sum;
}

double psi(const Coherency& c) { return psi(c, BinRange{0, c.values.size() / 2}); }

Bispectrum bispectrum(const SpectralFrames& fa, const SpectralFrames& fb,
                      const SpectralFrames& fc, Triple label, bool keep_cache) {
  if (fa.seg_len != fb.seg_len || fa.seg_len != fc.seg_len ||
      fa.n_segments != fb.n_segments || fa.n_segments != fc.n_segments)
    throw std::invalid_argument("bispectrum: frame shape mismatch");
  const std::size_t m = fa.seg_len;
  const std::size_t n = fa.n_segments;
  const std::size_t mm = m * m;

  Bispectrum b;
  b.size = m;
  b.n_segments = n;
  b.triple = label;
  b.values.assign(mm, cplx(0.0, 0.0));
  if (keep_cache) b.per_segment.resize(n * mm);

  std::vector<cplx> conj_c(m);
  for (std::size_t s = 0; s < n; ++s) {
    const cplx* fa_s = fa.coeffs.data() + s * m;
    const cplx* fb_s = fb.coeffs.data() + s * m;
    const cplx* fc_s = fc.coeffs.data() + s * m;
    for (std::size_t k = 0; k < m; ++k) conj_c[k] = std::conj(fc_s[k]);

    std::complex<float>* cache_s = keep_cache ? b.per_segment.data() + s * mm : nullptr;
    for (std::size_t f1 = 0; f1 < m; ++f1) {
      const cplx a = fa_s[f1];
      cplx* row = b.values.data() + f1 * m;
      // f1+f2 wraps at m; split the loop to avoid the modulo
      const std::size_t split = m - f1;
      for (std::size_t f2 = 0; f2 < split; ++f2) {
        const cplx triple = a * fb_s[f2] * conj_c[f1 + f2];
        if (cache_s) cache_s[f1 * m + f2] = std::complex<float>(triple);
        else row[f2] += triple;
      }
      for (std::size_t f2 = split; f2 < m; ++f2) {
        const cplx triple = a * fb_s[f2] * conj_c[f1 + f2 - m];
        if (cache_s) cache_s[f1 * m + f2] = std::complex<float>(triple);
        else row[f2] += triple;
      }
    }
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  if (keep_cache) {
    // accumulate the single-precision cache in double so the stored mean is
    // exactly the mean of the cache
    for (std::size_t s = 0; s < n; ++s) {
      const std::complex<float>* cache_s = b.per_segment.data() + s * mm;
      for (std::size_t j = 0; j < mm; ++j)
        b.values[j] += cplx(cache_s[j].real(), cache_s[j].imag());
    }
  }
  for (auto& v : b.values) v *= inv_n;
  return b;
}

std::vector<double> third_moment(std::span<const double> x, std::span<const double> y,
                                 std::span<const double> z, std::size_t max_lag) {
  const std::size_t t_len = x.size();
  if (y.size() != t_len || z.size() != t_len)
    throw std::invalid_argument("third_moment: unequal lengths");
  if (max_lag >= t_len) throw std::invalid_argument("third_moment: max_lag >= series length");

  const std::int64_t lag = static_cast<std::int64_t>(max_lag);
  const std::size_t grid = 2 * max_lag + 1;
  std::vector<double> c(grid * grid, 0.0);
  std::vector<double> w(t_len);
  const std::int64_t t_max = static_cast<std::int64_t>(t_len);
  for (std::int64_t r1 = -lag; r1 <= lag; ++r1) {
    // w(t) = x(t) y(t+r1) over the valid overlap
    const std::int64_t t0 = std::max<std::int64_t>(0, -r1);
    const std::int64_t t1 = std::min<std::int64_t>(t_max, t_max - r1);
    for (std::int64_t t = t0; t < t1; ++t) w[t] = x[t] * y[t + r1];
    double* row = c.data() + (r1 + lag) * grid;
    for (std::int64_t r2 = -lag; r2 <= lag; ++r2) {
      const std::int64_t u0 = std::max(t0, -r2);
      const std::int64_t u1 = std::min(t1, t_max - r2);
      double acc = 0.0;
      for (std::int64_t t = u0; t < u1; ++t) acc += w[t] * z[t + r2];
      row[r2 + lag] = acc / static_cast<double>(t_len);
    }
  }
  return c;
}

Bispectrum bispectrum_indirect(std::span<const double> x, std::span<const double> y,
                               std::span<const double> z, std::size_t max_lag,
                               LagWindow window) {
  std::vector<double> c = third_moment(x, y, z, max_lag);
  const std::size_t grid = 2 * max_lag + 1;
  const std::int64_t lag = static_cast<std::int64_t>(max_lag);

  if (window == LagWindow::parzen) {
    auto parzen = [&](std::int64_t r) {
      const double u = std::abs(static_cast<double>(r)) / static_cast<double>(max_lag + 1);
      if (u <= 0.5) return 1.0 - 6.0 * u * u + 6.0 * u * u * u;
      return 2.0 * std::pow(1.0 - u, 3.0);
    };
    for (std::int64_t r1 = -lag; r1 <= lag; ++r1)
      for (std::int64_t r2 = -lag; r2 <= lag; ++r2)
        c[(r1 + lag) * grid + (r2 + lag)] *= parzen(r1) * parzen(r2);
  }

  // place lags on the circular grid, index = lag mod grid
  std::vector<cplx> circ(grid * grid, cplx(0.0, 0.0));
  for (std::int64_t r1 = -lag; r1 <= lag; ++r1) {
    const std::size_t i = static_cast<std::size_t>((r1 + static_cast<std::int64_t>(grid)) % grid);
    for (std::int64_t r2 = -lag; r2 <= lag; ++r2) {
      const std::size_t j = static_cast<std::size_t>((r2 + static_cast<std::int64_t>(grid)) % grid);
      circ[i * grid + j] = c[(r1 + lag) * grid + (r2 + lag)];
    }
  }

  // 2-D DFT: rows then columns
  std::vector<cplx> rows(grid * grid);
  std::vector<cplx> buf(grid);
  for (std::size_t i = 0; i < grid; ++i) {
    const std::vector<cplx> spec = fft::forward({circ.data() + i * grid, grid});
    std::copy(spec.begin(), spec.end(), rows.begin() + i * grid);
  }
  std::vector<cplx> dft(grid * grid);
  for (std::size_t j = 0; j < grid; ++j) {
    for (std::size_t i = 0; i < grid; ++i) buf[i] = rows[i * grid + j];
    const std::vector<cplx> spec = fft::forward(buf);
    for (std::size_t i = 0; i < grid; ++i) dft[i * grid + j] = spec[i];
  }

  // The moment transform relates to <F(f1) F(f2) conj(F(f1+f2))> through the
  // substitution (g1, g2) = (f2, -(f1+f2)); remap so the result lives on the
  // same (f1, f2) plane as the direct estimator.
  Bispectrum b;
  b.size = grid;
  b.n_segments = 1;
  b.triple = Triple::indirect;
  b.values.resize(grid * grid);
  for (std::size_t f1 = 0; f1 < grid; ++f1) {
    for (std::size_t f2 = 0; f2 < grid; ++f2) {
      const std::size_t g1 = f2;
      const std::size_t g2 = (2 * grid - f1 - f2) % grid;
      b.values[f1 * grid + f2] = dft[g1 * grid + g2];
    }
  }
  return b;
}

Bispectrum antisymmetrize(const Bispectrum& b_xyx, const Bispectrum& b_yxx) {
  if (b_xyx.size != b_yxx.size || b_xyx.n_segments != b_yxx.n_segments ||
      b_xyx.has_cache() != b_yxx.has_cache())
    throw std::invalid_argument("antisymmetrize: bispectra mismatch");
  Bispectrum out;
  out.size = b_xyx.size;
  out.n_segments = b_xyx.n_segments;
  out.triple = Triple::antisym;
  out.values.resize(b_xyx.values.size());
  for (std::size_t j = 0; j < out.values.size(); ++j)
    out.values[j] = b_xyx.values[j] - b_yxx.values[j];
  if (b_xyx.has_cache()) {
    out.per_segment.resize(b_xyx.per_segment.size());
    for (std::size_t j = 0; j < out.per_segment.size(); ++j)
      out.per_segment[j] = b_xyx.per_segment[j] - b_yxx.per_segment[j];
  }
  return out;
}

double frobenius_norm(const Bispectrum& b) {
  double acc = 0.0;
  for (const cplx& v : b.values) acc += std::norm(v);
  return std::sqrt(acc);
}

std::vector<double> mean_periodogram(std::span<const double> series, std::size_t seg_len) {
  const SpectralFrames frames = make_frames(series, seg_len, 0.0);
  std::vector<double> psd(seg_len, 0.0);
  for (std::size_t s = 0; s < frames.n_segments; ++s) {
    const auto seg = frames.segment(s);
    for (std::size_t k = 0; k < seg_len; ++k) psd[k] += std::norm(seg[k]);
  }
  const double scale = 1.0 / (static_cast<double>(frames.n_segments) * static_cast<double>(seg_len));
  for (double& v : psd) v *= scale;
  return psd;
}

}  // namespace lagscope::spectral
