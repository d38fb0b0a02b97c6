#include "leosop/fft.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <utility>

namespace leosop {
namespace {

// fftw planning is not thread safe; execution with new-array is.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(std::size_t n, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(n, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    auto* in = fftw_alloc_complex(n);
    auto* out = fftw_alloc_complex(n);
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), in, out, sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache instance;
  return instance;
}

void execute(std::span<const Complex> x, ComplexVector& out, int sign) {
  out.resize(x.size());
  if (x.empty()) return;
  fftw_plan plan = cache().get(x.size(), sign);
  // fftw does not modify the input of an out-of-place complex transform
  auto* in = reinterpret_cast<fftw_complex*>(const_cast<Complex*>(x.data()));
  fftw_execute_dft(plan, in, reinterpret_cast<fftw_complex*>(out.data()));
}

}  // namespace

void fft_into(std::span<const Complex> x, ComplexVector& out) {
  execute(x, out, FFTW_FORWARD);
}

void ifft_into(std::span<const Complex> x, ComplexVector& out) {
  execute(x, out, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(x.size());
  for (auto& v : out) v *= scale;
}

void unscaled_ifft_into(std::span<const Complex> x, ComplexVector& out) {
  execute(x, out, FFTW_BACKWARD);
}

ComplexVector fft(std::span<const Complex> x) {
  ComplexVector out;
  fft_into(x, out);
  return out;
}

ComplexVector ifft(std::span<const Complex> x) {
  ComplexVector out;
  ifft_into(x, out);
  return out;
}

}  // namespace leosop
