#ifndef VGPU_BENCH_HPP
#define VGPU_BENCH_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "vgpu/client.hpp"
#include "vgpu/daemon.hpp"
#include "vgpu/model.hpp"

namespace vgpu::bench {

enum class Mode { Virtualized, Native };
const char* to_string(Mode m);

struct NamedProfile {
    std::string name;
    KernelProfile profile;
    KernelClass expected_class;
};

// The benchmark kernel table: grid sizes and classes from the usual SPMD
// suspects, timing triples synthetic but class-consistent (checked on
// first access).
const std::vector<NamedProfile>& builtin_profiles();
const NamedProfile& find_profile(const std::string& name);

struct BenchConfig {
    std::uint32_t n_processor = 8;
    std::uint32_t n_process = 8;  // must not exceed n_processor
    std::uint32_t n_vgpu = 8;     // virtualized unity ratio: equals n_processor
    std::string benchmark = "EP_M24";
    std::uint32_t repetitions = 1;
    Mode mode = Mode::Virtualized;
    ClockMode clock = ClockMode::Virtual;
    double scale = 1.0;
    Micros t_init = 150000;
    Micros t_ctx_switch = 5000;
    DeviceSpec device;
    bool os_processes = false;  // true: fork workers over the OS transport
                                // (requires a running daemon and a real clock);
                                // false: worker threads over loopback
    std::string instance = "default";
    std::uint64_t shm_bytes = 1 << 20;
};

void validate(const BenchConfig& cfg);

struct BenchRow {
    std::string benchmark;
    std::uint32_t n = 0;
    Mode mode = Mode::Virtualized;
    ClockMode clock = ClockMode::Virtual;
    Micros turnaround_us = 0;
    Micros pure_gpu_us = 0;
    double overhead_fraction = 0.0;
    Micros model_us = 0;
    double deviation_pct = 0.0;
    double speedup = 1.0;  // native turnaround over virtualized turnaround
};

struct BenchReport {
    std::vector<BenchRow> rows;
};
void write_report_csv(const BenchReport& r, std::ostream& out);

// Sweep N = 1..n_process, one batch of N SPMD workers per point.
BenchReport run_sweep(const BenchConfig& cfg);

// Pure-GPU batch time inside the daemon versus the closed forms, in the
// idealized regime (grid forced to 1, mirroring the grid-1 kernel choice
// that isolates the model from capacity effects).
struct DeviationRow {
    std::uint32_t n = 0;
    Micros model_us = 0;
    Micros measured_us = 0;  // device microseconds (wall/scale under real clock)
    double deviation_pct = 0.0;
};
struct DeviationTable {
    std::string benchmark;
    std::vector<DeviationRow> rows;
    double mean_deviation_pct = 0.0;
};
DeviationTable validate_model(const BenchConfig& cfg);
void write_deviation_csv(const DeviationTable& t, std::ostream& out);

// Single-process transfer-heavy runs across payload sizes; how much of the
// turnaround the virtualization layer adds. Under a virtual clock the
// fraction relates measured IPC wall time to the simulated total.
struct OverheadRow {
    std::uint64_t bytes = 0;
    Micros turnaround_us = 0;
    Micros pure_gpu_us = 0;
    Micros overhead_us = 0;
    double overhead_fraction = 0.0;
};
struct OverheadCurve {
    std::vector<OverheadRow> rows;
};
OverheadCurve measure_overhead(const BenchConfig& cfg,
                               const std::vector<std::uint64_t>& sizes);
void write_overhead_csv(const OverheadCurve& c, std::ostream& out);

// profile used by measure_overhead for a given payload size
KernelProfile overhead_profile(std::uint64_t bytes);

// Speedup of every builtin profile at N = n_process, with the closed-form
// prediction alongside. Also emits a gnuplot script next to the CSV.
struct SpeedupRow {
    std::string benchmark;
    KernelClass cls = KernelClass::ComputeIntensive;
    std::uint32_t grid = 1;
    std::uint32_t n = 0;
    Micros native_us = 0;
    Micros virtualized_us = 0;
    double speedup = 1.0;
    double model_speedup = 1.0;
};
struct SpeedupSummary {
    std::vector<SpeedupRow> rows;
};
SpeedupSummary speedup_summary(const BenchConfig& cfg);
void write_speedup_csv(const SpeedupSummary& s, std::ostream& out);
void write_speedup_gnuplot(const std::string& csv_path, std::ostream& out);

// closed-form prediction for one batch of n identical kernels under the
// style the daemon would pick
Micros model_batch_time(const KernelProfile& p, std::uint32_t n);
ModelParams to_model_params(const BenchConfig& cfg, const KernelProfile& p,
                            std::uint32_t n);

} // namespace vgpu::bench

#endif
