#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace lagscope::spectral {

using cplx = std::complex<double>;

// Per-segment Fourier coefficients; the cache all spectral estimators share.
// Full-length spectra are kept (M_F = seg_len) so bispectral f1+f2 indexing
// wraps naturally.
struct SpectralFrames {
  std::vector<cplx> coeffs;  // n_segments x seg_len, row-major
  double fs = 0.0;
  std::size_t seg_len = 0;
  std::size_t n_segments = 0;

  std::span<const cplx> segment(std::size_t s) const {
    return {coeffs.data() + s * seg_len, seg_len};
  }
};

// Contiguous non-overlapping segments; the remainder is discarded.
std::vector<std::vector<double>> segment(std::span<const double> series, std::size_t seg_len);

SpectralFrames fft_frames(const std::vector<std::vector<double>>& segments, double fs);

// segment() + fft_frames() in one step.
SpectralFrames make_frames(std::span<const double> series, std::size_t seg_len, double fs);

struct CrossSpectrum {
  std::vector<cplx> values;
  std::size_t n_segments = 0;
};

// S_XY(f) = <F_X(f) conj(F_Y(f))> across segments.
CrossSpectrum cross_spectrum(const SpectralFrames& fx, const SpectralFrames& fy);

struct PhaseSpectrum {
  std::vector<double> values;          // radians, in [-pi, pi]
  std::vector<std::uint8_t> defined;   // bins with |S| below tolerance are flagged
  std::size_t defined_count() const;
};

PhaseSpectrum phase_spectrum(const CrossSpectrum& s);

struct Coherency {
  std::vector<cplx> values;
  std::vector<std::uint8_t> defined;
};

// S_XY / sqrt(S_XX S_YY) per bin.
Coherency coherency(const SpectralFrames& fx, const SpectralFrames& fy);

struct BinRange {
  std::size_t first = 0;
  std::size_t last = 0;  // inclusive
};

// Phase slope index over adjacent-bin coherency products. The raw imaginary
// sum of Eq-style conj products is multiplied by a frozen calibration factor
// so that sign(psi) == sign(tau) for a noiseless delayed pair; pairs touching
// an undefined bin are skipped.
double psi(const Coherency& c, BinRange band);
double psi(const Coherency& c);  // full band [0, M_F/2]

enum class Triple { xyx, xxx, yyy, yxx, antisym, indirect };

struct Bispectrum {
  std::vector<cplx> values;  // size x size, row-major over (f1, f2)
  std::size_t size = 0;
  std::size_t n_segments = 0;
  Triple triple = Triple::xyx;
  // per-segment triple products for bootstrap averaging, single precision
  std::vector<std::complex<float>> per_segment;

  bool has_cache() const { return !per_segment.empty(); }
  const cplx& at(std::size_t f1, std::size_t f2) const { return values[f1 * size + f2]; }
};

// B(f1, f2) = <F_A(f1) F_B(f2) conj(F_C(f1+f2))>, f1+f2 taken modulo M_F.
// With keep_cache the per-segment products are retained (single precision);
// the averaged values are then accumulated from the cache in double precision
// so that mean-of-cache equals values exactly.
Bispectrum bispectrum(const SpectralFrames& fa, const SpectralFrames& fb,
                      const SpectralFrames& fc, Triple label, bool keep_cache);

enum class LagWindow { parzen, rectangular };

// Indirect estimate: third-order moment sequence C(r1, r2) = E[x(t) y(t+r1) z(t+r2)]
// over |r| <= max_lag, lag-windowed, then mapped to the frequency plane. The
// Parzen lag window is the conventional smoothing for this estimator.
Bispectrum bispectrum_indirect(std::span<const double> x, std::span<const double> y,
                               std::span<const double> z, std::size_t max_lag,
                               LagWindow window = LagWindow::parzen);

// Third-order moment sequence itself, (2 max_lag + 1)^2, row-major over (r1, r2).
std::vector<double> third_moment(std::span<const double> x, std::span<const double> y,
                                 std::span<const double> z, std::size_t max_lag);

// B_[X|YX] = B_XYX - B_YXX, elementwise; caches differenced likewise.
Bispectrum antisymmetrize(const Bispectrum& b_xyx, const Bispectrum& b_yxx);

double frobenius_norm(const Bispectrum& b);

// Segment-averaged periodogram, |F(f)|^2 / M per bin averaged over segments.
std::vector<double> mean_periodogram(std::span<const double> series, std::size_t seg_len);

}  // namespace lagscope::spectral
