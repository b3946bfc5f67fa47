#include "lagscope/siggen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "lagscope/fft.hpp"

namespace lagscope::siggen {

using cplx = std::complex<double>;
using std::numbers::pi;

double mean_square(std::span<const double> samples) {
  double acc = 0.0;
  for (double v : samples) acc += v * v;
  return acc / static_cast<double>(samples.size());
}

void power_normalize(std::vector<double>& samples) {
  const double ms = mean_square(samples);
  if (ms <= 0.0) throw std::invalid_argument("power_normalize: zero-power series");
  const double scale = 1.0 / std::sqrt(ms);
  for (double& v : samples) v *= scale;
}

SourceSeries gen_white(WhiteKind kind, std::size_t n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("gen_white: n must be >= 1");
  SourceSeries out;
  out.kind = kind == WhiteKind::gaussian ? SourceKind::gaussian_white : SourceKind::exponential_white;
  out.samples.resize(n);
  if (kind == WhiteKind::gaussian) {
    for (double& v : out.samples) v = rng.normal();
  } else {
    // Exp(1) has mean 1; subtract it to satisfy the zero-mean requirement.
    for (double& v : out.samples) v = rng.exponential() - 1.0;
  }
  power_normalize(out.samples);
  return out;
}

SourceSeries gen_pink(std::size_t n, double lambda, Rng& rng, double fs) {
  if (n < 2) throw std::invalid_argument("gen_pink: n must be >= 2");
  if (lambda < 0.0) throw std::invalid_argument("gen_pink: lambda must be >= 0");

  std::vector<cplx> spectrum(n, cplx(0.0, 0.0));
  const std::size_t half = n / 2;
  for (std::size_t k = 1; k < half; ++k) {
    const double amp = std::pow(static_cast<double>(k), -lambda / 2.0);
    const double phase = rng.uniform(-pi, pi);
    spectrum[k] = std::polar(amp, phase);
    spectrum[n - k] = std::conj(spectrum[k]);
  }
  if (n % 2 == 0 && half >= 1) {
    // Nyquist bin has to stay real for a real series.
    const double amp = std::pow(static_cast<double>(half), -lambda / 2.0);
    spectrum[half] = cplx(amp * std::cos(rng.uniform(-pi, pi)), 0.0);
  }

  const std::vector<cplx> time = fft::inverse(spectrum);
  SourceSeries out;
  out.kind = SourceKind::pink;
  out.fs = fs;
  out.samples.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    // conjugate symmetry makes the series exactly real; anything beyond
    // roundoff means the spectrum was assembled wrong
    if (std::abs(time[t].imag()) > 1e-12)
      throw std::runtime_error("gen_pink: nonreal synthesis residue");
    out.samples[t] = time[t].real();
  }
  power_normalize(out.samples);
  return out;
}

namespace {

struct Zpk {
  std::vector<cplx> zeros;
  std::vector<cplx> poles;
  double gain = 1.0;
};

Zpk butterworth_prototype(int order) {
  Zpk proto;
  proto.poles.reserve(order);
  for (int k = 0; k < order; ++k) {
    const double theta = (2.0 * k + 1.0) * pi / (2.0 * order);
    proto.poles.emplace_back(-std::sin(theta), std::cos(theta));
  }
  // Unity DC gain: k = prod(-p), real for a Butterworth set.
  cplx prod(1.0, 0.0);
  for (const cplx& p : proto.poles) prod *= -p;
  proto.gain = prod.real();
  return proto;
}

Zpk lp_to_lp(const Zpk& proto, double omega_c) {
  Zpk out = proto;
  for (cplx& p : out.poles) p *= omega_c;
  for (cplx& z : out.zeros) z *= omega_c;
  const int degree = static_cast<int>(proto.poles.size() - proto.zeros.size());
  out.gain *= std::pow(omega_c, degree);
  return out;
}

Zpk lp_to_hp(const Zpk& proto, double omega_c) {
  Zpk out;
  cplx num(1.0, 0.0), den(1.0, 0.0);
  for (const cplx& z : proto.zeros) num *= -z;
  for (const cplx& p : proto.poles) den *= -p;
  for (const cplx& z : proto.zeros) out.zeros.push_back(omega_c / z);
  for (const cplx& p : proto.poles) out.poles.push_back(omega_c / p);
  // zeros at s = 0 fill the degree deficit
  const int degree = static_cast<int>(proto.poles.size() - proto.zeros.size());
  for (int i = 0; i < degree; ++i) out.zeros.emplace_back(0.0, 0.0);
  out.gain = proto.gain * (num / den).real();
  return out;
}

Zpk lp_to_bp(const Zpk& proto, double omega_lo, double omega_hi) {
  const double bw = omega_hi - omega_lo;
  const double omega0_sq = omega_lo * omega_hi;
  Zpk out;
  auto transform = [&](const cplx& s, std::vector<cplx>& dst) {
    const cplx scaled = s * (bw / 2.0);
    const cplx root = std::sqrt(scaled * scaled - omega0_sq);
    dst.push_back(scaled + root);
    dst.push_back(scaled - root);
  };
  for (const cplx& z : proto.zeros) transform(z, out.zeros);
  for (const cplx& p : proto.poles) transform(p, out.poles);
  const int degree = static_cast<int>(proto.poles.size() - proto.zeros.size());
  for (int i = 0; i < degree; ++i) out.zeros.emplace_back(0.0, 0.0);
  out.gain = proto.gain * std::pow(bw, degree);
  return out;
}

Zpk bilinear(const Zpk& analog, double fs) {
  const double fs2 = 2.0 * fs;
  Zpk digital;
  cplx num(1.0, 0.0), den(1.0, 0.0);
  for (const cplx& z : analog.zeros) {
    digital.zeros.push_back((fs2 + z) / (fs2 - z));
    num *= fs2 - z;
  }
  for (const cplx& p : analog.poles) {
    digital.poles.push_back((fs2 + p) / (fs2 - p));
    den *= fs2 - p;
  }
  // zeros at infinity map to z = -1
  while (digital.zeros.size() < digital.poles.size()) digital.zeros.emplace_back(-1.0, 0.0);
  digital.gain = analog.gain * (num / den).real();
  return digital;
}

// Pair conjugate roots into biquads. Butterworth roots come in conjugate
// pairs plus at most one real root per band edge, so sorting by imaginary
// part magnitude and pairing neighbours is sufficient.
IirFilter to_sections(const Zpk& digital, double fs) {
  auto order_roots = [](std::vector<cplx> roots) {
    std::sort(roots.begin(), roots.end(), [](const cplx& a, const cplx& b) {
      const double ia = std::abs(a.imag()), ib = std::abs(b.imag());
      if (ia != ib) return ia > ib;
      if (a.real() != b.real()) return a.real() < b.real();
      return a.imag() > b.imag();
    });
    return roots;
  };
  const std::vector<cplx> poles = order_roots(digital.poles);
  const std::vector<cplx> zeros = order_roots(digital.zeros);
  if (poles.size() != zeros.size())
    throw std::runtime_error("butterworth: unexpected root layout");

  IirFilter filter;
  filter.fs = fs;
  for (std::size_t i = 0; i < poles.size(); i += 2) {
    IirFilter::Biquad s{};
    s.b0 = 1.0;
    if (i + 1 < poles.size()) {
      s.b1 = -(zeros[i] + zeros[i + 1]).real();
      s.b2 = (zeros[i] * zeros[i + 1]).real();
      s.a1 = -(poles[i] + poles[i + 1]).real();
      s.a2 = (poles[i] * poles[i + 1]).real();
    } else {
      // odd order leaves one real root
      s.b1 = -zeros[i].real();
      s.b2 = 0.0;
      s.a1 = -poles[i].real();
      s.a2 = 0.0;
    }
    filter.sections.push_back(s);
  }
  // fold the overall gain into the first section
  filter.sections.front().b0 *= digital.gain;
  filter.sections.front().b1 *= digital.gain;
  filter.sections.front().b2 *= digital.gain;
  return filter;
}

double prewarp(double f_hz, double fs) { return 2.0 * fs * std::tan(pi * f_hz / fs); }

}  // namespace

IirFilter design_butterworth(const FilterSpec& spec, double fs) {
  if (spec.order < 1) throw std::invalid_argument("butterworth: order must be >= 1");
  const std::size_t n_edges = spec.kind == FilterKind::bandpass ? 2 : 1;
  if (spec.edges_hz.size() != n_edges)
    throw std::invalid_argument("butterworth: wrong number of band edges");
  for (double edge : spec.edges_hz) {
    if (!(edge > 0.0 && edge < fs / 2.0))
      throw std::invalid_argument("butterworth: band edge outside (0, fs/2)");
  }

  const Zpk proto = butterworth_prototype(spec.order);
  Zpk analog;
  switch (spec.kind) {
    case FilterKind::lowpass:
      analog = lp_to_lp(proto, prewarp(spec.edges_hz[0], fs));
      break;
    case FilterKind::highpass:
      analog = lp_to_hp(proto, prewarp(spec.edges_hz[0], fs));
      break;
    case FilterKind::bandpass: {
      if (!(spec.edges_hz[0] < spec.edges_hz[1]))
        throw std::invalid_argument("butterworth: bandpass edges must be increasing");
      analog = lp_to_bp(proto, prewarp(spec.edges_hz[0], fs), prewarp(spec.edges_hz[1], fs));
      break;
    }
  }
  const Zpk digital = bilinear(analog, fs);
  for (const cplx& p : digital.poles) {
    if (std::abs(p) >= 1.0) throw std::runtime_error("butterworth: unstable design");
  }
  return to_sections(digital, fs);
}

SourceSeries butterworth(const SourceSeries& series, const FilterSpec& spec) {
  const IirFilter filter = design_butterworth(spec, series.fs);
  SourceSeries out = series;
  for (const auto& s : filter.sections) {
    double d1 = 0.0, d2 = 0.0;
    for (double& v : out.samples) {
      const double x = v;
      const double y = s.b0 * x + d1;
      d1 = s.b1 * x - s.a1 * y + d2;
      d2 = s.b2 * x - s.a2 * y;
      v = y;
    }
  }
  return out;
}

double filter_gain(const IirFilter& filter, double freq_hz) {
  const cplx z = std::polar(1.0, 2.0 * pi * freq_hz / filter.fs);
  const cplx zi = 1.0 / z;
  cplx h(1.0, 0.0);
  for (const auto& s : filter.sections) {
    h *= (s.b0 + s.b1 * zi + s.b2 * zi * zi) / (1.0 + s.a1 * zi + s.a2 * zi * zi);
  }
  return std::abs(h);
}

SourceSeries gen_autocorr_noise(std::size_t n, double fs, Rng& rng) {
  if (fs < 100.0) throw std::invalid_argument("gen_autocorr_noise: fs must be >= 100 Hz");
  SourceSeries pink = gen_pink(n, 0.7, rng, fs);

  SourceSeries alpha = gen_white(WhiteKind::gaussian, n, rng);
  alpha.fs = fs;
  alpha = butterworth(alpha, {FilterKind::highpass, {1.0}, 4});
  alpha = butterworth(alpha, {FilterKind::lowpass, {45.0}, 4});
  alpha = butterworth(alpha, {FilterKind::bandpass, {8.0, 13.0}, 4});
  power_normalize(alpha.samples);

  SourceSeries out;
  out.kind = SourceKind::composite;
  out.fs = fs;
  out.samples.resize(n);
  for (std::size_t t = 0; t < n; ++t) out.samples[t] = pink.samples[t] + alpha.samples[t];
  power_normalize(out.samples);
  return out;
}

TrialPair assemble_trial(const SourceSeries& signal, const SourceSeries& nx,
                         const SourceSeries& ny, const MixParams& params) {
  if (params.alpha < 0.0 || params.alpha > 1.0)
    throw std::invalid_argument("assemble_trial: alpha outside [0, 1]");
  if (params.beta != 1 && params.beta != -1)
    throw std::invalid_argument("assemble_trial: beta must be -1 or +1");
  if (nx.samples.size() != ny.samples.size())
    throw std::invalid_argument("assemble_trial: noise sources differ in length");

  const std::size_t T = nx.samples.size();
  if (signal.samples.size() < T)
    throw std::invalid_argument("assemble_trial: signal shorter than noise");
  const std::int64_t offset = static_cast<std::int64_t>((signal.samples.size() - T) / 2);
  if (std::llabs(params.tau) > offset)
    throw std::invalid_argument("assemble_trial: signal too short for requested delay");

  TrialPair pair;
  pair.fs = nx.fs > 0.0 ? nx.fs : signal.fs;
  pair.truth = params;
  pair.x_obs.resize(T);
  pair.y_obs.resize(T);
  const double a = params.alpha;
  const double na = 1.0 - params.alpha;
  const double beta = static_cast<double>(params.beta);
  const double* sig = signal.samples.data();
  for (std::size_t t = 0; t < T; ++t) {
    const double st = sig[offset + static_cast<std::int64_t>(t)];
    const double st_delayed = sig[offset + static_cast<std::int64_t>(t) - params.tau];
    pair.x_obs[t] = a * st + na * (nx.samples[t] + params.theta1 * ny.samples[t]);
    pair.y_obs[t] = a * beta * st_delayed + na * (ny.samples[t] + params.theta2 * nx.samples[t]);
  }
  return pair;
}

double snr_db(double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("snr_db: alpha outside [0, 1]");
  if (alpha == 0.0) return -std::numeric_limits<double>::infinity();
  if (alpha == 1.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(alpha / (1.0 - alpha));
}

}  // namespace lagscope::siggen
