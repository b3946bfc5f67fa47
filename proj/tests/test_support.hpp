#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "lagscope/rng.hpp"
#include "lagscope/siggen.hpp"

namespace lagscope::testing {

inline double mean(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

inline double variance(std::span<const double> v) {
  const double m = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size());
}

inline double skewness(std::span<const double> v) {
  const double m = mean(v);
  double m2 = 0.0, m3 = 0.0;
  for (double x : v) {
    const double d = x - m;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= static_cast<double>(v.size());
  m3 /= static_cast<double>(v.size());
  return m3 / std::pow(m2, 1.5);
}

inline double autocorr_at(std::span<const double> v, std::size_t lag) {
  const double m = mean(v);
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t + lag < v.size(); ++t)
    num += (v[t] - m) * (v[t + lag] - m);
  for (double x : v) den += (x - m) * (x - m);
  return num / den;
}

inline double circular_distance(double a, double b) {
  const double d = std::remainder(a - b, 2.0 * std::numbers::pi);
  return std::abs(d);
}

// least-squares slope of y against x
inline double regression_slope(std::span<const double> x, std::span<const double> y) {
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / sxx;
}

// Standard mixed-noise trial used across the suites: exponential signal,
// configurable noise, theta1 = theta2 = theta, beta = 1.
struct TrialSpec {
  double alpha = 1.0;
  double theta = 0.0;
  std::int64_t tau = 0;
  std::size_t n_segments = 65;
  std::size_t seg_len = 200;
  double fs = 100.0;
  bool gaussian_noise = false;
};

inline siggen::TrialPair make_test_trial(const TrialSpec& spec, std::uint64_t seed) {
  const std::size_t t_len = spec.n_segments * spec.seg_len;
  const std::size_t margin = spec.seg_len;
  Rng rng_sig(Rng::derive(seed, 2));
  siggen::SourceSeries signal =
      siggen::gen_white(siggen::WhiteKind::exponential, t_len + 2 * margin, rng_sig);
  signal.fs = spec.fs;
  Rng rng_nx(Rng::derive(seed, 3));
  Rng rng_ny(Rng::derive(seed, 4));
  const auto kind = spec.gaussian_noise ? siggen::WhiteKind::gaussian : siggen::WhiteKind::exponential;
  siggen::SourceSeries nx = siggen::gen_white(kind, t_len, rng_nx);
  siggen::SourceSeries ny = siggen::gen_white(kind, t_len, rng_ny);
  nx.fs = spec.fs;
  ny.fs = spec.fs;
  siggen::MixParams params;
  params.alpha = spec.alpha;
  params.theta1 = spec.theta;
  params.theta2 = spec.theta;
  params.beta = 1;
  params.tau = spec.tau;
  return siggen::assemble_trial(signal, nx, ny, params);
}

}  // namespace lagscope::testing
