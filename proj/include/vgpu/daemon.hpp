#ifndef VGPU_DAEMON_HPP
#define VGPU_DAEMON_HPP

#include <memory>
#include <string>
#include <vector>

#include "vgpu/device.hpp"
#include "vgpu/payload.hpp"
#include "vgpu/transport.hpp"
#include "vgpu/types.hpp"

namespace vgpu {

// Virtual: timestamps come from a simulated clock that only advances by
// batch makespans; requests complete instantly in wall time. Real:
// completions are paced by sleeping scale * simulated duration, so wall
// measurements mean something.
enum class ClockMode { Virtual, Real };

struct GvmConfig {
    std::string instance = "default";
    std::uint32_t max_clients = 8;
    std::uint64_t per_client_shm_bytes = 1 << 20;
    Micros barrier_window = 2000;   // wall microseconds from first queued
                                    // task until a partial batch is flushed
    std::uint32_t barrier_size = 0; // tasks that trigger a flush; 0 = max_clients
    DeviceSpec device;
    Micros t_init = 150000;         // one-time context cost, charged at start
    Micros t_ctx_switch = 5000;     // kept for reporting; the daemon never switches
    ClockMode clock = ClockMode::Virtual;
    double scale = 1.0;             // real-clock pacing: wall = scale * simulated
};

// Session lifecycle, in the order the protocol allows.
enum class Phase { Idle, Leased, DataIn, Queued, Running, Done, Released };
const char* to_string(Phase p);

// Virtual clock: all fields are simulated microseconds. Real clock: wall
// microseconds as measured (queue_wait from arrival to dispatch, pure_gpu
// the paced device interval, end_to_end arrival to completion).
struct TaskMetrics {
    std::uint64_t task_id = 0;
    std::uint32_t client_id = 0;
    Micros queue_wait_us = 0;
    Micros pure_gpu_us = 0;
    Micros end_to_end_us = 0;
};

struct BatchMetrics {
    std::uint64_t batch_id = 0;
    ProgrammingStyle style = ProgrammingStyle::PS1;
    std::uint32_t task_count = 0;
    Micros model_makespan_us = 0;     // simulated batch makespan
    Micros measured_makespan_us = 0;  // == model under virtual clock; wall under real
};

struct MetricsSnapshot {
    std::vector<TaskMetrics> tasks;
    std::vector<BatchMetrics> batches;
    Micros uptime_us = 0;  // virtual: t_init + sum of batch makespans
    Micros busy_us = 0;    // sum of batch model makespans
    Micros t_init_us = 0;  // charged exactly once
    std::uint64_t batches_flushed = 0;
};

void write_metrics_csv(const MetricsSnapshot& m, std::ostream& out);

// The GPU Virtualization Manager. Owns the one simulated device context,
// leases per-client regions, gathers concurrently arriving kernels behind
// a barrier and dispatches each batch as one multi-stream work queue.
class GvmDaemon {
public:
    static std::unique_ptr<GvmDaemon> start(
        GvmConfig cfg, std::unique_ptr<DaemonTransport> transport,
        const PayloadRegistry* payloads = nullptr);
    static std::unique_ptr<GvmDaemon> start_loopback(GvmConfig cfg,
                                                     LoopbackHub& hub);
    static std::unique_ptr<GvmDaemon> start_os(GvmConfig cfg);

    ~GvmDaemon();
    GvmDaemon(const GvmDaemon&) = delete;
    GvmDaemon& operator=(const GvmDaemon&) = delete;

    void stop();
    MetricsSnapshot metrics() const;
    const GvmConfig& config() const { return cfg_; }

private:
    GvmDaemon(GvmConfig cfg, std::unique_ptr<DaemonTransport> transport,
              const PayloadRegistry* payloads);

    struct Impl;
    GvmConfig cfg_;
    std::unique_ptr<Impl> impl_;
};

} // namespace vgpu

#endif
