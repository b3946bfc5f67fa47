#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lagscope/siggen.hpp"
#include "lagscope/spectral.hpp"

namespace lagscope::estimators {

using cplx = std::complex<double>;
using siggen::TrialPair;
using spectral::Bispectrum;
using spectral::PhaseSpectrum;

enum class Method {
  crosscorr,
  phase_slope,
  phase_periodicity,
  bispec_m1,
  bispec_m2,
  bispec_m3,
  bispec_m4,
  asb_m1,
  asb_m2,
  asb_m3,
  asb_m4,
};

std::string method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);

enum class PanelMethod { m1, m2, m3, m4 };

// Thrown when an estimator has no defined output (constant channels, all
// phase bins undefined). Callers that resample catch it and count the miss.
class undefined_estimate : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct DelayEstimate {
  std::int64_t lag_samples = 0;
  double lag_seconds = 0.0;
  Method method = Method::crosscorr;
  double peak_value = 0.0;
  std::optional<int> psi_sign;
};

struct Panel {
  std::vector<cplx> values;  // size x size, row-major over (f1, f2)
  std::size_t size = 0;
  PanelMethod method = PanelMethod::m1;
  bool antisym = false;
  std::size_t n_guarded = 0;  // entries zeroed by the denominator guard
};

struct Hologram {
  std::vector<double> values;  // indexed by circular lag
  PanelMethod method = PanelMethod::m1;
  bool antisym = false;
};

// Map a circular index into the signed lag range [-M/2, M/2).
std::int64_t circular_lag(std::size_t index, std::size_t m);

// Per-segment epoch-wise cross-correlograms, rho in [-max_lag, max_lag].
// r_s(rho) = (1/M) sum over the valid in-segment overlap of x(t) y(t+rho).
struct Correlogram {
  std::vector<double> per_segment;  // n_segments x (2 max_lag + 1)
  std::size_t n_segments = 0;
  std::int64_t max_lag = 0;

  std::size_t n_lags() const { return 2 * static_cast<std::size_t>(max_lag) + 1; }
  std::vector<double> mean() const;
};

Correlogram correlogram(std::span<const double> x, std::span<const double> y,
                        std::size_t seg_len, std::size_t max_lag);

// argmax over |r|, ties toward smaller |rho| then negative rho.
DelayEstimate crosscorr_from_mean(std::span<const double> mean_r, std::int64_t max_lag, double fs);

DelayEstimate tde_crosscorr(const TrialPair& pair, std::size_t seg_len, std::size_t max_lag);

// Wrapped-residual grid search over integer delays d in [-M/2, M/2):
// minimize sum over defined bins of wrap(P(k) - 2 pi k d / M)^2.
DelayEstimate tde_phase_slope(const PhaseSpectrum& p, double fs);

// |FFT(P)| argmax over t in [1, M/2] (DC and redundant half excluded),
// signed by sign(psi). Undefined bins enter the transform as zeros.
DelayEstimate tde_phase_periodicity(const PhaseSpectrum& p, double psi_value, double fs);

// Bispectral contrast panel I(f1, f2). With antisym, B_XYX is replaced by
// B_XYX - B_YXX wherever it appears; denominators stay untouched. M3/M4
// denominator entries below epsilon times the median magnitude are zeroed.
Panel panel(PanelMethod method, const Bispectrum& b_xyx, const Bispectrum& b_xxx,
            const Bispectrum* b_yyy, bool antisym, const Bispectrum* b_yxx);

// h(rho) = Re IDFT over f2 of sum over f1 of I(f1, f2). Summing out f1 leaves
// the axis whose phase carries the delay (the M1 panel reduces to
// exp(-i P_XY(f2)) for a pure delay), so the peak lands at rho = tau.
Hologram hologram(const Panel& p);

// argmax of h, ties toward smaller |lag| then negative.
std::pair<std::int64_t, double> hologram_argmax(const Hologram& h);

DelayEstimate tde_bispec(const TrialPair& pair, std::size_t seg_len, PanelMethod method,
                         bool antisym);

struct BandwidthRequirement {
  std::size_t bins = 0;
  bool resolvable = false;  // false when the requirement exceeds M_F
};

// Minimum band to resolve the sawtooth twice: 2 M_F / |tau| bins, rounded up.
BandwidthRequirement min_bandwidth_for_delay(std::int64_t tau_samples, std::size_t m_f);

Method bispec_method(PanelMethod panel, bool antisym);
bool is_bispectral(Method m);
PanelMethod panel_of(Method m);
bool is_antisym(Method m);

}  // namespace lagscope::estimators
