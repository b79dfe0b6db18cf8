#include "ngi/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>

namespace ngi::fft {

namespace {

// FFTW planning is not thread safe; executing distinct arrays is. Plans are
// created with FFTW_UNALIGNED so they can be re-executed on any buffer.
std::mutex g_plan_mutex;
std::map<std::tuple<int, int, int>, fftw_plan> g_plans;

fftw_plan plan_for(int height, int width, int sign) {
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  auto key = std::make_tuple(height, width, sign);
  auto it = g_plans.find(key);
  if (it != g_plans.end()) return it->second;

  fftw_complex* scratch = fftw_alloc_complex(
      static_cast<std::size_t>(height) * static_cast<std::size_t>(width));
  if (!scratch) throw std::bad_alloc();
  fftw_plan plan = fftw_plan_dft_2d(height, width, scratch, scratch, sign,
                                    FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(scratch);
  if (!plan) throw std::runtime_error("fftw planning failed");
  g_plans.emplace(key, plan);
  return plan;
}

}  // namespace

void transform2d(std::complex<double>* data, int height, int width, int sign) {
  if (height < 1 || width < 1)
    throw std::invalid_argument("fft: empty buffer");
  if (sign != -1 && sign != 1)
    throw std::invalid_argument("fft: sign must be -1 or +1");
  fftw_plan plan = plan_for(height, width, sign);
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(data),
                   reinterpret_cast<fftw_complex*>(data));
}

}  // namespace ngi::fft
