#ifndef VGPU_DEVICE_HPP
#define VGPU_DEVICE_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "vgpu/types.hpp"

namespace vgpu {

// One simulated device. Kernel concurrency is bounded by a pool of
// per-SM block slots plus a cap on resident kernels; each transfer
// direction has a single exclusive copy channel. Defaults mirror a
// 14-SM part with 16-way kernel concurrency.
struct DeviceSpec {
    std::uint32_t num_sms = 14;
    std::uint32_t max_concurrent_kernels = 16;
    std::uint32_t block_slots_per_sm = 8;
    std::uint32_t h2d_channels = 1;  // fixed: one copy engine per direction
    std::uint32_t d2h_channels = 1;

    std::uint32_t total_block_slots() const {
        return num_sms * block_slots_per_sm;
    }
};

enum class CommandKind { SendData, Compute, RtrvData };

struct StreamCommand {
    std::uint32_t stream_id = 0;
    CommandKind kind = CommandKind::SendData;
    std::uint64_t task_id = 0;
    KernelProfile profile;
};

// The single hardware work queue all streams multiplex into. PS-1 holds
// all sends, then all computes, then all retrieves; PS-2 holds one
// send/compute/retrieve triple per stream.
struct WorkQueue {
    ProgrammingStyle style = ProgrammingStyle::PS1;
    std::vector<StreamCommand> commands;
};

enum class ScheduleMode { Virtualized, NativeSharing };

struct TimelineEntry {
    std::uint64_t task_id = 0;
    std::uint32_t stream_id = 0;
    CommandKind kind = CommandKind::SendData;
    Micros start = 0;
    Micros end = 0;
};

struct Timeline {
    ScheduleMode mode = ScheduleMode::Virtualized;
    std::optional<ProgrammingStyle> style;  // set for virtualized schedules
    std::vector<TimelineEntry> entries;
    Micros makespan = 0;

    // Latest end / earliest start among one task's commands.
    Micros task_end(std::uint64_t task_id) const;
    Micros task_start(std::uint64_t task_id) const;
};

WorkQueue build_work_queue(ProgrammingStyle style,
                           std::span<const KernelProfile> profiles);
WorkQueue build_work_queue(ProgrammingStyle style,
                           std::span<const KernelProfile> profiles,
                           std::span<const std::uint64_t> task_ids);

// Earliest-start schedule of the queue on the device, honoring the
// hardware-queue blocking rules:
//   - per-stream order send -> compute -> retrieve;
//   - one exclusive channel per transfer direction (H2D and D2H may
//     overlap each other);
//   - a retrieve starts only after every compute enqueued before it has
//     completed;
//   - a compute enqueued after a retrieve waits for the compute that
//     retrieve depends on;
//   - a compute takes min(grid_size, free block slots) slots, at most
//     max_concurrent_kernels kernels resident, and runs for
//     t_comp * ceil(grid_size / granted_slots).
Timeline simulate(const WorkQueue& queue, const DeviceSpec& device);

// The non-virtualized baseline: per-process init + send/compute/retrieve
// cycles strictly back to back, with a context switch between processes.
Timeline simulate_native(std::span<const KernelProfile> profiles,
                         Micros t_init, Micros t_ctx_switch);

// One row per command: task_id,stream_id,kind,start_us,end_us.
void write_timeline_csv(const Timeline& timeline, std::ostream& out);

const char* to_string(CommandKind k);

} // namespace vgpu

#endif
