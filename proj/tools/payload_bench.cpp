// payload-bench: throughput of the OpenMP payload kernels against their
// serial references.

#include <chrono>
#include <cstdio>
#include <vector>

#include "vgpu/payload_kernels.hpp"

namespace {

using Clock = std::chrono::steady_clock;

template <class F>
double mbytes_per_sec(F&& fn, std::size_t bytes_touched, int iters) {
    fn();  // warm up
    const auto t0 = Clock::now();
    for (int i = 0; i < iters; ++i) fn();
    const auto t1 = Clock::now();
    const double secs =
        std::chrono::duration_cast<std::chrono::duration<double>>(t1 - t0)
            .count();
    return static_cast<double>(bytes_touched) * iters / secs / 1.0e6;
}

} // namespace

int main() {
    for (std::size_t n : {1u << 16, 1u << 20, 1u << 23}) {
        std::vector<float> a(n, 1.5f), b(n, 2.5f), out(n);
        const std::size_t touched = 3 * n * sizeof(float);
        const int iters = n >= (1u << 23) ? 10 : 100;

        const double serial = mbytes_per_sec(
            [&] {
                vgpu::kernels::vector_add_serial(out.data(), a.data(), b.data(),
                                                 n);
            },
            touched, iters);
        const double parallel = mbytes_per_sec(
            [&] { vgpu::kernels::vector_add(out.data(), a.data(), b.data(), n); },
            touched, iters);
        std::printf("vector-add   n=%8zu  serial %8.0f MB/s  omp %8.0f MB/s  x%.2f\n",
                    n, serial, parallel, parallel / serial);

        const double sserial = mbytes_per_sec(
            [&] {
                vgpu::kernels::vector_scale_serial(out.data(), a.data(), 2.0f, n);
            },
            2 * n * sizeof(float), iters);
        const double sparallel = mbytes_per_sec(
            [&] { vgpu::kernels::vector_scale(out.data(), a.data(), 2.0f, n); },
            2 * n * sizeof(float), iters);
        std::printf("vector-scale n=%8zu  serial %8.0f MB/s  omp %8.0f MB/s  x%.2f\n",
                    n, sserial, sparallel, sparallel / sserial);
    }
    return 0;
}
