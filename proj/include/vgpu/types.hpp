#ifndef VGPU_TYPES_HPP
#define VGPU_TYPES_HPP

#include <cstdint>
#include <string>

namespace vgpu {

// All device-side durations are integer microseconds. Ratios (speedups,
// deviations) are doubles.
using Micros = std::uint64_t;

enum class KernelClass { ComputeIntensive, IOIntensive, Intermediate };

// PS1 batches the three stages across streams (kernel concurrency);
// PS2 issues each stream's send/compute/retrieve triple back to back
// (I/O concurrency).
enum class ProgrammingStyle { PS1, PS2 };

struct KernelProfile {
    Micros t_data_in = 0;   // host-to-device transfer time
    Micros t_comp = 0;      // kernel compute time at full allocation
    Micros t_data_out = 0;  // device-to-host transfer time
    std::uint32_t grid_size = 1;
    std::string payload_id = "identity";
    std::uint64_t input_bytes = 0;
    std::uint64_t output_bytes = 0;
};

struct ModelParams {
    std::uint32_t n_process = 1;
    Micros t_init = 0;        // per-process device/context initialization
    Micros t_ctx_switch = 0;  // average switch cost between contexts
    KernelProfile profile;
};

const char* to_string(KernelClass c);
const char* to_string(ProgrammingStyle s);

} // namespace vgpu

#endif
