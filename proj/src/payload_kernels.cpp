#include "vgpu/payload_kernels.hpp"

#include <cstdint>

namespace vgpu::kernels {

void vector_add(float* out, const float* a, const float* b, std::size_t n) {
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < count; ++i) out[i] = a[i] + b[i];
}

void vector_add_serial(float* out, const float* a, const float* b,
                       std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void vector_scale(float* out, const float* in, float factor, std::size_t n) {
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < count; ++i) out[i] = in[i] * factor;
}

void vector_scale_serial(float* out, const float* in, float factor,
                         std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = in[i] * factor;
}

} // namespace vgpu::kernels
