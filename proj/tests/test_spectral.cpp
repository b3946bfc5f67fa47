#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lagscope/fft.hpp"
#include "lagscope/siggen.hpp"
#include "lagscope/spectral.hpp"
#include "test_support.hpp"

using namespace lagscope;
using namespace lagscope::testing;
using spectral::cplx;
using std::numbers::pi;

namespace {

// frames of a series and a circularly-shifted copy: the exact setting of the
// discrete shift theorem
std::pair<spectral::SpectralFrames, spectral::SpectralFrames> circular_pair(
    std::size_t n_segments, std::size_t seg_len, std::int64_t tau, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> segs_x(n_segments), segs_y(n_segments);
  for (std::size_t s = 0; s < n_segments; ++s) {
    segs_x[s].resize(seg_len);
    segs_y[s].resize(seg_len);
    for (auto& v : segs_x[s]) v = rng.exponential() - 1.0;
    for (std::size_t t = 0; t < seg_len; ++t) {
      const std::size_t src =
          static_cast<std::size_t>(((static_cast<std::int64_t>(t) - tau) % static_cast<std::int64_t>(seg_len) +
                                    static_cast<std::int64_t>(seg_len)) %
                                   static_cast<std::int64_t>(seg_len));
      segs_y[s][t] = segs_x[s][src];
    }
  }
  return {spectral::fft_frames(segs_x, 100.0), spectral::fft_frames(segs_y, 100.0)};
}

double wrap(double a) { return std::remainder(a, 2.0 * pi); }

}  // namespace

TEST_CASE("segment counts and remainder policy") {
  std::vector<double> series(13000, 0.0);
  CHECK(spectral::segment(series, 200).size() == 65);
  series.resize(400);
  CHECK(spectral::segment(series, 200).size() == 2);
  series.resize(450);
  const auto segs = spectral::segment(series, 200);
  CHECK(segs.size() == 2);
  CHECK(segs[1].size() == 200);
  series.resize(399);
  CHECK_THROWS_AS(spectral::segment(series, 200), std::invalid_argument);
}

TEST_CASE("dft of a unit impulse is flat") {
  std::vector<std::vector<double>> segs(1, std::vector<double>(64, 0.0));
  segs[0][0] = 1.0;
  const auto frames = spectral::fft_frames(segs, 100.0);
  for (const cplx& c : frames.segment(0)) {
    CHECK(c.real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(c.imag()) < 1e-12);
  }
}

TEST_CASE("dft of a cosine peaks at the matching bins") {
  const std::size_t m = 200;
  std::vector<std::vector<double>> segs(1, std::vector<double>(m));
  for (std::size_t t = 0; t < m; ++t)
    segs[0][t] = std::cos(2.0 * pi * 5.0 * static_cast<double>(t) / static_cast<double>(m));
  const auto frames = spectral::fft_frames(segs, 100.0);
  const auto seg = frames.segment(0);
  for (std::size_t k = 0; k < m; ++k) {
    if (k == 5 || k == m - 5)
      CHECK(std::abs(seg[k]) == doctest::Approx(static_cast<double>(m) / 2.0).epsilon(1e-9));
    else
      CHECK(std::abs(seg[k]) < 1e-9);
  }
}

TEST_CASE("fft round trip") {
  Rng rng(77);
  std::vector<cplx> x(200);
  for (auto& v : x) v = cplx(rng.normal(), rng.normal());
  const auto back = fft::inverse(fft::forward(x));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back[i] - x[i]) < 1e-10);
}

TEST_CASE("frames keep conjugate symmetry for real input") {
  Rng rng(5);
  std::vector<std::vector<double>> segs(3, std::vector<double>(128));
  for (auto& seg : segs)
    for (auto& v : seg) v = rng.normal();
  const auto frames = spectral::fft_frames(segs, 100.0);
  for (std::size_t s = 0; s < 3; ++s) {
    const auto seg = frames.segment(s);
    for (std::size_t k = 1; k < 128; ++k)
      CHECK(std::abs(seg[k] - std::conj(seg[128 - k])) < 1e-9);
  }
}

TEST_CASE("auto-spectrum is real and nonnegative") {
  const auto [fx, fy] = circular_pair(8, 100, 0, 3);
  const auto s = spectral::cross_spectrum(fx, fx);
  for (const cplx& v : s.values) {
    CHECK(std::abs(v.imag()) < 1e-9);
    CHECK(v.real() >= -1e-12);
  }
}

TEST_CASE("shift theorem holds exactly on circular shifts") {
  for (const std::int64_t tau : {7L, -23L, 60L}) {
    const auto [fx, fy] = circular_pair(12, 200, tau, 17);
    const auto s = spectral::cross_spectrum(fx, fy);
    for (std::size_t k = 0; k < 200; ++k) {
      const double expected = wrap(2.0 * pi * static_cast<double>(k) * static_cast<double>(tau) / 200.0);
      CHECK(circular_distance(std::arg(s.values[k]), expected) < 1e-9);
    }
  }
}

TEST_CASE("cross-spectrum shape mismatch throws") {
  const auto [fx, fy] = circular_pair(4, 64, 0, 1);
  const auto [gx, gy] = circular_pair(5, 64, 0, 1);
  CHECK_THROWS_AS(spectral::cross_spectrum(fx, gx), std::invalid_argument);
}

TEST_CASE("independent channels have a small cross-spectrum") {
  // Monte-Carlo bound: |S_XY(k)| < 5 sqrt(S_XX S_YY / N) on nearly every bin
  const std::size_t m = 200, n = 65;
  Rng rng(23);
  std::vector<double> x(n * m), y(n * m);
  for (auto& v : x) v = rng.normal();
  for (auto& v : y) v = rng.normal();
  const auto fx = spectral::make_frames(x, m, 100.0);
  const auto fy = spectral::make_frames(y, m, 100.0);
  const auto sxy = spectral::cross_spectrum(fx, fy);
  const auto sxx = spectral::cross_spectrum(fx, fx);
  const auto syy = spectral::cross_spectrum(fy, fy);
  std::size_t within = 0;
  for (std::size_t k = 0; k < m; ++k) {
    const double bound =
        5.0 * std::sqrt(sxx.values[k].real() * syy.values[k].real() / static_cast<double>(n));
    if (std::abs(sxy.values[k]) < bound) ++within;
  }
  CHECK(static_cast<double>(within) >= 0.99 * static_cast<double>(m));
}

TEST_CASE("phase spectrum basics") {
  spectral::CrossSpectrum s;
  s.n_segments = 1;
  s.values = {cplx(1.0, 0.0), cplx(0.0, 1.0), cplx(-2.0, 0.0), cplx(0.0, 0.0)};
  const auto p = spectral::phase_spectrum(s);
  CHECK(p.values[0] == doctest::Approx(0.0));
  CHECK(p.values[1] == doctest::Approx(pi / 2.0));
  CHECK(p.values[2] == doctest::Approx(pi));
  CHECK(p.defined[0] == 1);
  CHECK(p.defined[3] == 0);  // zero bin flagged, not failed
}

TEST_CASE("noiseless phase spectrum is the sawtooth") {
  const std::int64_t tau = 7;
  const auto [fx, fy] = circular_pair(10, 200, tau, 29);
  const auto p = spectral::phase_spectrum(spectral::cross_spectrum(fx, fy));
  for (std::size_t k = 0; k < 200; ++k) {
    if (!p.defined[k]) continue;
    const double expected = wrap(2.0 * pi * 7.0 * static_cast<double>(k) / 200.0);
    CHECK(circular_distance(p.values[k], expected) < 1e-6);
  }
}

TEST_CASE("coherency of a channel with itself is one") {
  const auto [fx, fy] = circular_pair(10, 128, 0, 31);
  const auto c = spectral::coherency(fx, fx);
  for (std::size_t k = 0; k < 128; ++k) {
    if (!c.defined[k]) continue;
    CHECK(std::abs(c.values[k] - cplx(1.0, 0.0)) < 1e-9);
  }
}

TEST_CASE("coherency magnitude never exceeds one") {
  const TrialSpec spec{.alpha = 0.3, .theta = 0.7, .tau = 19, .n_segments = 30, .seg_len = 128};
  const auto pair = make_test_trial(spec, 41);
  const auto fx = spectral::make_frames(pair.x_obs, 128, pair.fs);
  const auto fy = spectral::make_frames(pair.y_obs, 128, pair.fs);
  const auto c = spectral::coherency(fx, fy);
  for (const cplx& v : c.values) CHECK(std::abs(v) <= 1.0 + 1e-9);
}

TEST_CASE("independent channels give weak coherency") {
  Rng rng(101);
  std::vector<double> x(65 * 200), y(65 * 200);
  for (auto& v : x) v = rng.normal();
  for (auto& v : y) v = rng.normal();
  const auto c = spectral::coherency(spectral::make_frames(x, 200, 100.0),
                                     spectral::make_frames(y, 200, 100.0));
  double acc = 0.0;
  for (const cplx& v : c.values) acc += std::abs(v);
  CHECK(acc / static_cast<double>(c.values.size()) < 0.25);
}

TEST_CASE("psi vanishes for identical channels and signs the delay") {
  const auto [fx, fy] = circular_pair(10, 200, 0, 53);
  CHECK(spectral::psi(spectral::coherency(fx, fx)) == doctest::Approx(0.0).epsilon(1e-12));

  // noiseless oracle fixing the sign convention: sign(psi) == sign(tau)
  for (const std::int64_t tau : {10L, -10L, 33L, -71L}) {
    const TrialSpec spec{.alpha = 1.0, .theta = 0.0, .tau = tau, .n_segments = 65};
    const auto pair = make_test_trial(spec, 61);
    const auto c = spectral::coherency(spectral::make_frames(pair.x_obs, 200, pair.fs),
                                       spectral::make_frames(pair.y_obs, 200, pair.fs));
    const double value = spectral::psi(c);
    CHECK((tau > 0 ? value > 0.0 : value < 0.0));
  }
}

TEST_CASE("psi band validation") {
  const auto [fx, fy] = circular_pair(4, 64, 0, 3);
  const auto c = spectral::coherency(fx, fy);
  CHECK_THROWS_AS(spectral::psi(c, {5, 5}), std::invalid_argument);
  CHECK_THROWS_AS(spectral::psi(c, {5, 200}), std::invalid_argument);
  CHECK_NOTHROW(spectral::psi(c, {0, 32}));
}

TEST_CASE("single-segment bispectrum equals the triple product") {
  const std::size_t m = 32;
  Rng rng(13);
  std::vector<std::vector<double>> segs(1, std::vector<double>(m));
  for (auto& v : segs[0]) v = rng.exponential() - 1.0;
  const auto frames = spectral::fft_frames(segs, 100.0);
  const auto b = spectral::bispectrum(frames, frames, frames, spectral::Triple::xxx, false);
  const auto seg = frames.segment(0);
  for (std::size_t f1 = 0; f1 < m; ++f1)
    for (std::size_t f2 = 0; f2 < m; ++f2) {
      const cplx expected = seg[f1] * seg[f2] * std::conj(seg[(f1 + f2) % m]);
      CHECK(std::abs(b.at(f1, f2) - expected) < 1e-9 * (1.0 + std::abs(expected)));
    }
}

TEST_CASE("gaussian bispectrum magnitude shrinks as 1/sqrt(N)") {
  auto norm_at = [](std::size_t n_segments, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(n_segments * 200);
    for (auto& v : x) v = rng.normal();
    const auto f = spectral::make_frames(x, 200, 100.0);
    return spectral::frobenius_norm(
        spectral::bispectrum(f, f, f, spectral::Triple::xxx, false));
  };
  const double n65 = norm_at(65, 7);
  const double n650 = norm_at(650, 7);
  // Frobenius norm over 40000 weakly-dependent entries concentrates, so the
  // 1/sqrt(N) shrink shows up as a ratio close to sqrt(10)
  CHECK(n65 / n650 > 2.2);
  CHECK(n65 / n650 < 4.5);
}

TEST_CASE("bispectrum cache mean equals stored values") {
  const TrialSpec spec{.alpha = 0.5, .theta = 0.7, .tau = 9, .n_segments = 20, .seg_len = 64};
  const auto pair = make_test_trial(spec, 71);
  const auto fx = spectral::make_frames(pair.x_obs, 64, pair.fs);
  const auto fy = spectral::make_frames(pair.y_obs, 64, pair.fs);
  const auto b = spectral::bispectrum(fx, fy, fx, spectral::Triple::xyx, true);
  REQUIRE(b.has_cache());
  const std::size_t mm = 64 * 64;
  for (std::size_t j = 0; j < mm; ++j) {
    cplx acc(0.0, 0.0);
    for (std::size_t s = 0; s < b.n_segments; ++s) {
      const auto& c = b.per_segment[s * mm + j];
      acc += cplx(c.real(), c.imag());
    }
    acc /= static_cast<double>(b.n_segments);
    CHECK(std::abs(acc - b.values[j]) < 1e-10);
  }
}

TEST_CASE("bispectrum additivity for independent signal and noise") {
  // finite-sample residual of the additive-superposition identity; the ratio
  // scales like sqrt(M/N), so the bound is checked where it verifiably holds
  auto ratio_at = [](std::size_t n_segments) {
    const std::size_t m = 64;
    Rng rng(19);
    std::vector<double> s(n_segments * m), n(n_segments * m);
    for (auto& v : s) v = rng.exponential() - 1.0;
    for (auto& v : n) v = rng.normal();
    std::vector<double> x(n_segments * m);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = s[i] + n[i];
    const auto fs = spectral::make_frames(s, m, 100.0);
    const auto fn = spectral::make_frames(n, m, 100.0);
    const auto fx = spectral::make_frames(x, m, 100.0);
    const auto bs = spectral::bispectrum(fs, fs, fs, spectral::Triple::xxx, false);
    const auto bn = spectral::bispectrum(fn, fn, fn, spectral::Triple::xxx, false);
    const auto bx = spectral::bispectrum(fx, fx, fx, spectral::Triple::xxx, false);
    double num = 0.0;
    for (std::size_t j = 0; j < bx.values.size(); ++j)
      num += std::norm(bx.values[j] - bs.values[j] - bn.values[j]);
    return std::sqrt(num) / spectral::frobenius_norm(bs);
  };
  const double at2000 = ratio_at(2000);
  const double at20000 = ratio_at(20000);
  CHECK(at20000 < 0.1);
  CHECK(at20000 < at2000);
}

TEST_CASE("unmixed noise leaves the phase spectrum near the sawtooth") {
  const std::int64_t tau = 13;
  const TrialSpec spec{.alpha = 0.6, .theta = 0.0, .tau = tau, .n_segments = 65};
  const auto pair = make_test_trial(spec, 83);
  const auto p = spectral::phase_spectrum(spectral::cross_spectrum(
      spectral::make_frames(pair.x_obs, 200, pair.fs),
      spectral::make_frames(pair.y_obs, 200, pair.fs)));
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < 200; ++k) {
    if (!p.defined[k]) continue;
    const double expected = wrap(2.0 * pi * static_cast<double>(tau) * static_cast<double>(k) / 200.0);
    acc += circular_distance(p.values[k], expected);
    ++n;
  }
  CHECK(acc / static_cast<double>(n) < 0.15);
}

TEST_CASE("antisymmetrization cancels identical channels exactly") {
  const TrialSpec spec{.alpha = 0.5, .theta = 0.0, .tau = 0, .n_segments = 10, .seg_len = 64};
  const auto pair = make_test_trial(spec, 91);
  const auto fx = spectral::make_frames(pair.x_obs, 64, pair.fs);
  const auto b_xyx = spectral::bispectrum(fx, fx, fx, spectral::Triple::xyx, true);
  const auto b_yxx = spectral::bispectrum(fx, fx, fx, spectral::Triple::yxx, true);
  const auto asb = spectral::antisymmetrize(b_xyx, b_yxx);
  for (const cplx& v : asb.values) CHECK(std::abs(v) == 0.0);
  for (const auto& v : asb.per_segment) CHECK(std::abs(v) == 0.0f);
}

TEST_CASE("antisymmetrization is antisymmetric") {
  const TrialSpec spec{.alpha = 0.4, .theta = 0.7, .tau = 5, .n_segments = 12, .seg_len = 64};
  const auto pair = make_test_trial(spec, 97);
  const auto fx = spectral::make_frames(pair.x_obs, 64, pair.fs);
  const auto fy = spectral::make_frames(pair.y_obs, 64, pair.fs);
  const auto a = spectral::bispectrum(fx, fy, fx, spectral::Triple::xyx, false);
  const auto b = spectral::bispectrum(fy, fx, fx, spectral::Triple::yxx, false);
  const auto ab = spectral::antisymmetrize(a, b);
  const auto ba = spectral::antisymmetrize(b, a);
  for (std::size_t j = 0; j < ab.values.size(); ++j)
    CHECK(ab.values[j] == -ba.values[j]);
}

TEST_CASE("antisymmetrization removes mixed-noise bispectra in norm") {
  // alpha = 0: pure mixed noise. The population antisymmetrized bispectrum is
  // zero; the finite-sample Frobenius ratio was measured by Monte Carlo at
  // 0.38 +- 0.01 for N = 65 and shrinks with N.
  auto ratio_at = [](std::size_t n_segments, std::uint64_t seed) {
    const TrialSpec spec{.alpha = 0.0, .theta = 0.7, .tau = 0, .n_segments = n_segments};
    const auto pair = make_test_trial(spec, seed);
    const auto fx = spectral::make_frames(pair.x_obs, 200, pair.fs);
    const auto fy = spectral::make_frames(pair.y_obs, 200, pair.fs);
    const auto b_xyx = spectral::bispectrum(fx, fy, fx, spectral::Triple::xyx, false);
    const auto b_yxx = spectral::bispectrum(fy, fx, fx, spectral::Triple::yxx, false);
    return spectral::frobenius_norm(spectral::antisymmetrize(b_xyx, b_yxx)) /
           spectral::frobenius_norm(b_xyx);
  };
  const double r65 = ratio_at(65, 7);
  const double r650 = ratio_at(650, 7);
  CHECK(r65 < 0.45);
  CHECK(r650 < r65);
  CHECK(r650 < 0.25);
}

TEST_CASE("third moment of white exponential noise concentrates at the origin") {
  Rng rng(3);
  const auto s = siggen::gen_white(siggen::WhiteKind::exponential, 13000, rng);
  const auto c = spectral::third_moment(s.samples, s.samples, s.samples, 10);
  const std::size_t grid = 21;
  const double at_origin = c[10 * grid + 10];
  CHECK(at_origin == doctest::Approx(2.0).epsilon(0.25));  // Exp(1) third cumulant
  for (std::size_t i = 0; i < grid; ++i)
    for (std::size_t j = 0; j < grid; ++j) {
      if (i == 10 && j == 10) continue;
      CHECK(std::abs(c[i * grid + j]) < at_origin / 3.0);
    }
}

TEST_CASE("third moment of gaussian noise is statistically zero") {
  Rng rng(11);
  const auto s = siggen::gen_white(siggen::WhiteKind::gaussian, 13000, rng);
  const auto c = spectral::third_moment(s.samples, s.samples, s.samples, 8);
  // stderr of a sixth-moment estimate, conservatively E[x^6] = 15
  const double bound = 5.0 * std::sqrt(15.0 / 13000.0);
  for (double v : c) CHECK(std::abs(v) < bound);
}

TEST_CASE("indirect bispectrum validates max_lag") {
  std::vector<double> x(100, 0.0);
  CHECK_THROWS_AS(spectral::bispectrum_indirect(x, x, x, 100), std::invalid_argument);
}

TEST_CASE("indirect bispectrum matches the direct one for skewed noise") {
  // unwindowed, the lag-domain route estimates the same object
  Rng rng(17);
  const auto s = siggen::gen_white(siggen::WhiteKind::exponential, 40 * 64, rng);
  const auto frames = spectral::make_frames(s.samples, 64, 100.0);
  const auto direct = spectral::bispectrum(frames, frames, frames, spectral::Triple::xxx, false);
  // direct estimator averages <F F F*> which is M times the lag-sum scale
  const auto indirect = spectral::bispectrum_indirect(s.samples, s.samples, s.samples, 31,
                                                      spectral::LagWindow::rectangular);
  // compare at the origin region where the white-noise bispectrum is flat
  const double d0 = direct.at(5, 9).real() / 64.0;
  const double i0 = indirect.at(5, 9).real();
  CHECK(i0 == doctest::Approx(d0).epsilon(0.35));
}

TEST_CASE("mixed gaussian zero-lag artifact: present in direct, suppressed in indirect") {
  // exponential signal with mixed gaussian noise; the direct hologram picks up
  // a spurious zero-lag peak, the lag-windowed indirect one does not
  const std::int64_t tau = 17;
  const TrialSpec spec{.alpha = 0.5, .theta = 0.7, .tau = tau, .n_segments = 65,
                       .gaussian_noise = true};
  const auto pair = make_test_trial(spec, 21);

  const auto fx = spectral::make_frames(pair.x_obs, 200, pair.fs);
  const auto fy = spectral::make_frames(pair.y_obs, 200, pair.fs);
  const auto d_xyx = spectral::bispectrum(fx, fy, fx, spectral::Triple::xyx, false);
  const auto d_xxx = spectral::bispectrum(fx, fx, fx, spectral::Triple::xxx, false);
  const auto i_xyx =
      spectral::bispectrum_indirect(pair.x_obs, pair.y_obs, pair.x_obs, 100);
  const auto i_xxx =
      spectral::bispectrum_indirect(pair.x_obs, pair.x_obs, pair.x_obs, 100);

  auto m1_hologram = [](const spectral::Bispectrum& num, const spectral::Bispectrum& den) {
    const std::size_t m = num.size;
    std::vector<cplx> g(m, cplx(0.0, 0.0));
    for (std::size_t f1 = 0; f1 < m; ++f1)
      for (std::size_t f2 = 0; f2 < m; ++f2) {
        const cplx a = num.at(f1, f2), b = den.at(f1, f2);
        const double ma = std::abs(a), mb = std::abs(b);
        g[f2] += (ma > 0.0 ? a / ma : cplx(1.0, 0.0)) *
                 std::conj(mb > 0.0 ? b / mb : cplx(1.0, 0.0));
      }
    const auto h = fft::inverse(g);
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) out[i] = h[i].real();
    return out;
  };

  const auto h_direct = m1_hologram(d_xyx, d_xxx);
  const auto h_indirect = m1_hologram(i_xyx, i_xxx);

  const double d_zero = h_direct[0];
  const double d_tau = h_direct[static_cast<std::size_t>(tau)];
  CHECK(d_zero > 0.5 * d_tau);  // spurious zero-lag peak present

  const std::size_t grid = h_indirect.size();
  const double i_zero = h_indirect[0];
  const double i_tau = h_indirect[static_cast<std::size_t>(tau)];
  CHECK(i_zero < 0.5 * i_tau);  // suppressed by the lag-windowed estimate
  // and the indirect hologram still peaks at the delay
  std::size_t argmax = 0;
  for (std::size_t i = 1; i < grid; ++i)
    if (h_indirect[i] > h_indirect[argmax]) argmax = i;
  CHECK(argmax == static_cast<std::size_t>(tau));
}
