#include "lagscope/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <unordered_map>

namespace lagscope::fft {

namespace {

// FFTW plan creation is not thread safe; execution on a plan's own buffers is
// safe only from one thread at a time. Each thread keeps its own plan cache so
// concurrent transforms never share state. FFTW_ESTIMATE keeps planning
// deterministic (no runtime measurement), which the bit-stability tests rely on.
std::mutex plan_mutex;

struct PlanSlot {
  fftw_plan plan = nullptr;
  fftw_complex* in = nullptr;
  fftw_complex* out = nullptr;
};

class PlanCache {
public:
  ~PlanCache() {
    std::lock_guard<std::mutex> lock(plan_mutex);
    for (auto& [key, slot] : slots_) {
      fftw_destroy_plan(slot.plan);
      fftw_free(slot.in);
      fftw_free(slot.out);
    }
  }

  PlanSlot& get(std::size_t n, int sign) {
    const std::uint64_t key = (static_cast<std::uint64_t>(n) << 1) | (sign == FFTW_FORWARD ? 0 : 1);
    auto it = slots_.find(key);
    if (it != slots_.end()) return it->second;
    std::lock_guard<std::mutex> lock(plan_mutex);
    PlanSlot slot;
    slot.in = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    slot.out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    slot.plan = fftw_plan_dft_1d(static_cast<int>(n), slot.in, slot.out, sign, FFTW_ESTIMATE);
    return slots_.emplace(key, slot).first->second;
  }

private:
  std::unordered_map<std::uint64_t, PlanSlot> slots_;
};

PlanSlot& thread_plan(std::size_t n, int sign) {
  thread_local PlanCache cache;
  return cache.get(n, sign);
}

std::vector<cplx> run(std::span<const cplx> input, int sign) {
  const std::size_t n = input.size();
  PlanSlot& slot = thread_plan(n, sign);
  for (std::size_t i = 0; i < n; ++i) {
    slot.in[i][0] = input[i].real();
    slot.in[i][1] = input[i].imag();
  }
  fftw_execute(slot.plan);
  std::vector<cplx> result(n);
  for (std::size_t i = 0; i < n; ++i) result[i] = cplx(slot.out[i][0], slot.out[i][1]);
  return result;
}

}  // namespace

std::vector<cplx> forward(std::span<const cplx> input) { return run(input, FFTW_FORWARD); }

std::vector<cplx> forward_real(std::span<const double> input) {
  std::vector<cplx> buf(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) buf[i] = cplx(input[i], 0.0);
  return run(buf, FFTW_FORWARD);
}

std::vector<cplx> inverse(std::span<const cplx> input) {
  std::vector<cplx> result = run(input, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(input.size());
  for (auto& v : result) v *= scale;
  return result;
}

}  // namespace lagscope::fft
