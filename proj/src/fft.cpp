#include "arim/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

namespace arim {
namespace {

// Planning is not thread-safe in FFTW; execution of an existing plan is.
fftw_plan plan_for(std::size_t n) {
    static std::mutex mutex;
    static std::map<std::size_t, fftw_plan> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[n];
    if (!slot) {
        auto* buf = fftw_alloc_complex(n);
        slot = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(buf);
    }
    return slot;
}

} // namespace

void fft_inplace(std::span<std::complex<double>> data) {
    if (data.size() <= 1) return;
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan_for(data.size()), p, p);
}

} // namespace arim
