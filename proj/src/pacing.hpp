#ifndef VGPU_SRC_PACING_HPP
#define VGPU_SRC_PACING_HPP

#include <chrono>
#include <thread>

namespace vgpu::detail {

// Sleep to an absolute deadline with microsecond-level accuracy: coarse
// sleep until close, then spin out the rest. Plain sleep_until drifts by
// milliseconds under load, which would drown the paced measurements.
inline void sleep_until_precise(std::chrono::steady_clock::time_point deadline) {
    using namespace std::chrono;
    constexpr auto spin_margin = 3ms;
    const auto coarse = deadline - spin_margin;
    if (steady_clock::now() < coarse) std::this_thread::sleep_until(coarse);
    while (steady_clock::now() < deadline) {
    }
}

} // namespace vgpu::detail

#endif
