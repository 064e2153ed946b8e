#ifndef VGPU_PAYLOAD_KERNELS_HPP
#define VGPU_PAYLOAD_KERNELS_HPP

#include <cstddef>

namespace vgpu::kernels {

// Data-parallel payload kernels. The *_serial variants are the reference
// implementations the parallel ones are tested against; payload-bench
// compares their throughput.

void vector_add(float* out, const float* a, const float* b, std::size_t n);
void vector_add_serial(float* out, const float* a, const float* b,
                       std::size_t n);

void vector_scale(float* out, const float* in, float factor, std::size_t n);
void vector_scale_serial(float* out, const float* in, float factor,
                         std::size_t n);

} // namespace vgpu::kernels

#endif
