#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lagscope/rng.hpp"

namespace lagscope::siggen {

enum class SourceKind { gaussian_white, exponential_white, pink, alpha_band, composite };

struct SourceSeries {
  std::vector<double> samples;
  double fs = 0.0;
  SourceKind kind = SourceKind::gaussian_white;
};

// Mixing model parameters: X = alpha x + (1-alpha)(nX + theta1 nY),
// Y = alpha beta x(t - tau) + (1-alpha)(nY + theta2 nX).
struct MixParams {
  double alpha = 1.0;
  double theta1 = 0.0;
  double theta2 = 0.0;
  int beta = 1;
  std::int64_t tau = 0;  // delay in samples
};

struct TrialPair {
  std::vector<double> x_obs;
  std::vector<double> y_obs;
  double fs = 0.0;
  std::optional<MixParams> truth;
};

enum class FilterKind { highpass, lowpass, bandpass };

struct FilterSpec {
  FilterKind kind = FilterKind::lowpass;
  std::vector<double> edges_hz;  // one edge for low/highpass, two for bandpass
  int order = 4;
};

// Designed IIR filter as cascaded biquads (direct form II transposed).
struct IirFilter {
  struct Biquad {
    double b0, b1, b2;  // numerator
    double a1, a2;      // denominator, a0 normalized to 1
  };
  std::vector<Biquad> sections;
  double fs = 0.0;
};

enum class WhiteKind { gaussian, exponential };

// Zero-mean, unit-power white noise. Exponential draws are centered by
// subtracting the analytic mean of Exp(1).
SourceSeries gen_white(WhiteKind kind, std::size_t n, Rng& rng);

// 1/|f|^lambda spectral synthesis: amplitudes |f|^(-lambda/2), iid uniform
// phases, conjugate-symmetric spectrum, zero DC bin, power normalized.
SourceSeries gen_pink(std::size_t n, double lambda, Rng& rng, double fs = 100.0);

// Butterworth design via the bilinear transform with frequency prewarping.
IirFilter design_butterworth(const FilterSpec& spec, double fs);

// Forward-only filtering with zero initial state.
SourceSeries butterworth(const SourceSeries& series, const FilterSpec& spec);

// |H(e^{i 2 pi f / fs})| of a designed filter; the oracle for gain checks.
double filter_gain(const IirFilter& filter, double freq_hz);

// Pink (lambda = 0.7) plus Butterworth-chained alpha-band component, both
// power normalized before summing; the sum is power normalized again.
SourceSeries gen_autocorr_noise(std::size_t n, double fs, Rng& rng);

// Assemble the two observed channels. The signal source must be longer than
// the noise sources so the delayed copy is cut from the same realization
// without wrap-around: both copies are taken relative to the centered offset
// (len(signal) - T) / 2, which must be >= |tau|.
TrialPair assemble_trial(const SourceSeries& signal, const SourceSeries& nx,
                         const SourceSeries& ny, const MixParams& params);

// 10 log10(alpha / (1 - alpha)); +-infinity at the boundaries.
double snr_db(double alpha);

// Divide by the RMS so the mean square becomes exactly 1.
void power_normalize(std::vector<double>& samples);

double mean_square(std::span<const double> samples);

}  // namespace lagscope::siggen
