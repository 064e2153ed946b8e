#include "vgpu/bench.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <latch>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace vgpu::bench {

namespace {

using Clock = std::chrono::steady_clock;

Micros wall_us(Clock::time_point from, Clock::time_point to) {
    return static_cast<Micros>(
        std::chrono::duration_cast<std::chrono::microseconds>(to - from)
            .count());
}

struct TaskData {
    Bytes input;
    Bytes expected;
};

// Two packed float arrays per task, patterned per worker so cross-client
// contamination shows up as a wrong sum.
TaskData make_task_data(std::uint64_t bytes, std::uint32_t worker) {
    const std::size_t n = std::max<std::size_t>(bytes / 8, 1);
    std::vector<float> a(n), b(n), sum(n);
    for (std::size_t j = 0; j < n; ++j) {
        a[j] = static_cast<float>(worker + 1) * 1000.0f + static_cast<float>(j % 512);
        b[j] = static_cast<float>(j % 512) * 0.25f;
        sum[j] = a[j] + b[j];
    }
    TaskData d;
    d.input.resize(n * 8);
    std::memcpy(d.input.data(), a.data(), n * 4);
    std::memcpy(d.input.data() + n * 4, b.data(), n * 4);
    d.expected.resize(n * 4);
    std::memcpy(d.expected.data(), sum.data(), n * 4);
    return d;
}

KernelDescriptor descriptor_for(const KernelProfile& p) {
    KernelDescriptor d;
    d.payload_id = p.payload_id;
    d.t_data_in = p.t_data_in;
    d.t_comp = p.t_comp;
    d.t_data_out = p.t_data_out;
    d.grid_size = p.grid_size;
    d.output_bytes = p.output_bytes;
    return d;
}

struct BatchRun {
    Micros wall_turnaround_us = 0;    // start barrier to last worker done
    Micros virtual_turnaround_us = 0; // max task end-to-end in device time
    Micros pure_gpu_us = 0;           // batch makespan (measured)
    Micros model_makespan_us = 0;     // batch makespan (simulated)
};

// One SPMD round: n workers lease a VGPU each, hit the start barrier, run
// one task apiece, verify the payload result, release.
BatchRun run_virtualized_batch(const BenchConfig& cfg, const KernelProfile& p,
                               std::uint32_t n) {
    LoopbackHub hub("bench");
    GvmConfig g;
    g.instance = "bench";
    g.max_clients = n;
    g.barrier_size = n;
    g.barrier_window = 1'000'000;  // workers stagger; the size trigger rules
    g.per_client_shm_bytes = std::max<std::uint64_t>(cfg.shm_bytes, 1 << 16);
    g.device = cfg.device;
    g.t_init = cfg.t_init;
    g.t_ctx_switch = cfg.t_ctx_switch;
    g.clock = cfg.clock;
    g.scale = cfg.scale;
    auto daemon = GvmDaemon::start_loopback(g, hub);

    const KernelDescriptor desc = descriptor_for(p);
    std::latch start(n + 1);
    std::vector<std::string> errors(n);
    std::vector<Clock::time_point> finished(n);
    std::vector<std::thread> workers;
    workers.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        workers.emplace_back([&, i] {
            bool arrived = false;
            try {
                VgpuHandle h = req(hub);
                const TaskData data = make_task_data(p.input_bytes, i);
                arrived = true;
                start.arrive_and_wait();
                const Bytes out = h.run_task(data.input, desc);
                if (out != data.expected) errors[i] = "payload result mismatch";
                h.rls();
            } catch (const std::exception& e) {
                errors[i] = e.what();
                if (!arrived) start.count_down();  // don't wedge the barrier
            }
            finished[i] = Clock::now();
        });
    }
    start.arrive_and_wait();
    const Clock::time_point t0 = Clock::now();
    for (auto& w : workers) w.join();
    for (const auto& e : errors)
        if (!e.empty()) throw std::runtime_error("worker failed: " + e);

    BatchRun r;
    Clock::time_point last = t0;
    for (const auto& f : finished) last = std::max(last, f);
    r.wall_turnaround_us = wall_us(t0, last);

    const MetricsSnapshot m = daemon->metrics();
    for (const auto& t : m.tasks)
        r.virtual_turnaround_us =
            std::max(r.virtual_turnaround_us, t.end_to_end_us);
    if (!m.batches.empty()) {
        r.pure_gpu_us = m.batches.back().measured_makespan_us;
        r.model_makespan_us = m.batches.back().model_makespan_us;
    }
    daemon->stop();
    return r;
}

Micros run_native_real(const BenchConfig& cfg, const KernelProfile& p,
                       std::uint32_t n) {
    const std::string lock_path =
        "/tmp/vgpu-native." + std::to_string(getpid()) + "." +
        std::to_string(reinterpret_cast<std::uintptr_t>(&cfg) & 0xffff) +
        ".lock";
    unlink(lock_path.c_str());

    NativeConfig nc;
    nc.t_init = cfg.t_init;
    nc.t_ctx_switch = cfg.t_ctx_switch;
    nc.clock = ClockMode::Real;
    nc.scale = cfg.scale;
    nc.lock_path = lock_path;

    const KernelDescriptor desc = descriptor_for(p);
    std::latch start(n + 1);
    std::vector<std::string> errors(n);
    std::vector<Clock::time_point> finished(n);
    std::vector<std::thread> workers;
    for (std::uint32_t i = 0; i < n; ++i) {
        workers.emplace_back([&, i] {
            bool arrived = false;
            try {
                NativeVgpu h{nc};
                const TaskData data = make_task_data(p.input_bytes, i);
                arrived = true;
                start.arrive_and_wait();
                const Bytes out = h.run_task(data.input, desc);
                if (out != data.expected) errors[i] = "payload result mismatch";
                h.rls();
            } catch (const std::exception& e) {
                errors[i] = e.what();
                if (!arrived) start.count_down();
            }
            finished[i] = Clock::now();
        });
    }
    start.arrive_and_wait();
    const Clock::time_point t0 = Clock::now();
    for (auto& w : workers) w.join();
    unlink(lock_path.c_str());
    for (const auto& e : errors)
        if (!e.empty()) throw std::runtime_error("native worker failed: " + e);

    Clock::time_point last = t0;
    for (const auto& f : finished) last = std::max(last, f);
    return wall_us(t0, last);
}

// Workers as real OS processes against an already-running daemon; the
// parent only broadcasts the start and joins.
Micros run_os_process_batch(const BenchConfig& cfg, const KernelProfile& p,
                            std::uint32_t n) {
    int start_pipe[2];
    if (pipe(start_pipe) != 0)
        throw std::runtime_error("bench: cannot create start pipe");

    const KernelDescriptor desc = descriptor_for(p);
    std::vector<pid_t> children;
    for (std::uint32_t i = 0; i < n; ++i) {
        const pid_t pid = fork();
        if (pid < 0) throw std::runtime_error("bench: fork failed");
        if (pid == 0) {
            close(start_pipe[1]);
            int status = 1;
            try {
                VgpuHandle h = req(cfg.instance);
                const TaskData data = make_task_data(p.input_bytes, i);
                char go = 0;
                if (read(start_pipe[0], &go, 1) != 1) _exit(2);
                const Bytes out = h.run_task(data.input, desc);
                status = out == data.expected ? 0 : 3;
                h.rls();
            } catch (...) {
                status = 4;
            }
            _exit(status);
        }
        children.push_back(pid);
    }
    close(start_pipe[0]);

    const Clock::time_point t0 = Clock::now();
    std::vector<char> go(n, 1);
    if (write(start_pipe[1], go.data(), n) != static_cast<ssize_t>(n))
        throw std::runtime_error("bench: start broadcast failed");
    bool failed = false;
    for (const pid_t pid : children) {
        int st = 0;
        waitpid(pid, &st, 0);
        if (!WIFEXITED(st) || WEXITSTATUS(st) != 0) failed = true;
    }
    const Clock::time_point t1 = Clock::now();
    close(start_pipe[1]);
    if (failed) throw std::runtime_error("bench: worker process failed");
    return wall_us(t0, t1);
}

} // namespace

const char* to_string(Mode m) {
    return m == Mode::Virtualized ? "virtualized" : "native";
}

void validate(const BenchConfig& cfg) {
    if (cfg.n_process < 1 || cfg.n_process > cfg.n_processor)
        throw std::invalid_argument(
            "bench: n_process must be in 1..n_processor");
    if (cfg.n_vgpu != cfg.n_processor)
        throw std::invalid_argument(
            "bench: virtualized unity ratio requires n_vgpu == n_processor");
    if (cfg.repetitions < 1)
        throw std::invalid_argument("bench: repetitions must be >= 1");
    if (cfg.os_processes && cfg.clock != ClockMode::Real)
        throw std::invalid_argument(
            "bench: OS-process workers need the real clock (daemon metrics "
            "are not visible across processes)");
}

ModelParams to_model_params(const BenchConfig& cfg, const KernelProfile& p,
                            std::uint32_t n) {
    return ModelParams{n, cfg.t_init, cfg.t_ctx_switch, p};
}

Micros model_batch_time(const KernelProfile& p, std::uint32_t n) {
    const ModelParams m{n, 0, 0, p};
    return recommend_style(classify_kernel(p)) == ProgrammingStyle::PS1
               ? t_total_ps1(m)
               : t_total_ioi_ps2(m);
}

BenchReport run_sweep(const BenchConfig& cfg) {
    validate(cfg);
    const KernelProfile& profile = find_profile(cfg.benchmark).profile;
    BenchReport report;

    for (std::uint32_t n = 1; n <= cfg.n_process; ++n) {
        BenchRow row;
        row.benchmark = cfg.benchmark;
        row.n = n;
        row.mode = cfg.mode;
        row.clock = cfg.clock;

        const ModelParams native_params = to_model_params(cfg, profile, n);
        const Micros native_model = t_total_no_vt(native_params);

        Micros turnaround_sum = 0;
        Micros pure_sum = 0;
        Micros model_us = 0;
        for (std::uint32_t rep = 0; rep < cfg.repetitions; ++rep) {
            if (cfg.mode == Mode::Virtualized) {
                if (cfg.os_processes) {
                    turnaround_sum += run_os_process_batch(cfg, profile, n);
                    model_us = model_batch_time(profile, n);
                } else {
                    const BatchRun r = run_virtualized_batch(cfg, profile, n);
                    turnaround_sum += cfg.clock == ClockMode::Virtual
                                          ? r.virtual_turnaround_us
                                          : r.wall_turnaround_us;
                    pure_sum += r.pure_gpu_us;
                    model_us = model_batch_time(profile, n);
                }
            } else {
                if (cfg.clock == ClockMode::Virtual) {
                    const std::vector<KernelProfile> ps(n, profile);
                    const Micros t =
                        simulate_native(ps, cfg.t_init, cfg.t_ctx_switch)
                            .makespan;
                    turnaround_sum += t;
                    pure_sum += t;
                } else {
                    turnaround_sum += run_native_real(cfg, profile, n);
                }
                model_us = native_model;
            }
        }

        row.turnaround_us = turnaround_sum / cfg.repetitions;
        row.pure_gpu_us = pure_sum / cfg.repetitions;
        row.model_us = model_us;
        // under the real clock measurements are wall time: compare against
        // the scaled model
        const double clock_scale =
            cfg.clock == ClockMode::Real ? cfg.scale : 1.0;
        const double model_scaled =
            static_cast<double>(model_us) * clock_scale;
        if (row.pure_gpu_us > 0 && model_scaled > 0.0) {
            row.deviation_pct =
                100.0 *
                std::abs(static_cast<double>(row.pure_gpu_us) - model_scaled) /
                model_scaled;
            if (row.turnaround_us > 0)
                row.overhead_fraction =
                    1.0 - static_cast<double>(row.pure_gpu_us) /
                              static_cast<double>(row.turnaround_us);
        }
        row.speedup =
            cfg.mode == Mode::Virtualized && row.turnaround_us > 0
                ? static_cast<double>(native_model) * clock_scale /
                      static_cast<double>(row.turnaround_us)
                : 1.0;
        report.rows.push_back(std::move(row));
    }
    return report;
}

DeviationTable validate_model(const BenchConfig& cfg) {
    validate(cfg);
    KernelProfile profile = find_profile(cfg.benchmark).profile;
    profile.grid_size = 1;  // idealized regime isolates the closed forms

    DeviationTable table;
    table.benchmark = cfg.benchmark;
    double dev_sum = 0.0;
    for (std::uint32_t n = 1; n <= cfg.n_process; ++n) {
        std::vector<Micros> measured;
        for (std::uint32_t rep = 0; rep < cfg.repetitions; ++rep) {
            const BatchRun r = run_virtualized_batch(cfg, profile, n);
            Micros device_us = r.pure_gpu_us;
            if (cfg.clock == ClockMode::Real)
                device_us = static_cast<Micros>(
                    static_cast<double>(r.pure_gpu_us) / cfg.scale);
            measured.push_back(device_us);
        }
        std::sort(measured.begin(), measured.end());

        DeviationRow row;
        row.n = n;
        row.model_us = model_batch_time(profile, n);
        row.measured_us = measured[measured.size() / 2];
        row.deviation_pct =
            100.0 *
            std::abs(static_cast<double>(row.measured_us) -
                     static_cast<double>(row.model_us)) /
            static_cast<double>(row.model_us);
        dev_sum += row.deviation_pct;
        table.rows.push_back(row);
    }
    table.mean_deviation_pct = dev_sum / static_cast<double>(cfg.n_process);
    return table;
}

KernelProfile overhead_profile(std::uint64_t bytes) {
    KernelProfile p;
    p.t_data_in = bytes / 500;            // a 0.5 GB/s transfer link
    p.t_data_out = bytes / 500;
    p.t_comp = 400000 + bytes / 2000;     // fixed setup plus linear compute
    p.grid_size = 1;
    p.payload_id = "vector-add";
    p.input_bytes = bytes;
    p.output_bytes = bytes / 2;
    return p;
}

OverheadCurve measure_overhead(const BenchConfig& cfg,
                               const std::vector<std::uint64_t>& sizes) {
    OverheadCurve curve;
    for (std::uint64_t raw : sizes) {
        const std::uint64_t bytes = std::max<std::uint64_t>(raw & ~7ULL, 8);
        const KernelProfile p = overhead_profile(bytes);

        BenchConfig one = cfg;
        one.shm_bytes = std::max<std::uint64_t>(cfg.shm_bytes, bytes);
        OverheadRow row;
        row.bytes = bytes;
        for (std::uint32_t rep = 0; rep < cfg.repetitions; ++rep) {
            const BatchRun r = run_virtualized_batch(one, p, 1);
            if (cfg.clock == ClockMode::Real) {
                row.turnaround_us += r.wall_turnaround_us;
                row.pure_gpu_us += r.pure_gpu_us;
            } else {
                // wall time is pure virtualization-layer work here; relate
                // it to the simulated device total
                row.turnaround_us += r.wall_turnaround_us + r.model_makespan_us;
                row.pure_gpu_us += r.model_makespan_us;
            }
        }
        row.turnaround_us /= cfg.repetitions;
        row.pure_gpu_us /= cfg.repetitions;
        row.overhead_us = row.turnaround_us > row.pure_gpu_us
                              ? row.turnaround_us - row.pure_gpu_us
                              : 0;
        if (row.turnaround_us > 0)
            row.overhead_fraction = static_cast<double>(row.overhead_us) /
                                    static_cast<double>(row.turnaround_us);
        curve.rows.push_back(row);
    }
    return curve;
}

SpeedupSummary speedup_summary(const BenchConfig& cfg) {
    validate(cfg);
    SpeedupSummary summary;
    for (const auto& named : builtin_profiles()) {
        const std::uint32_t n = cfg.n_process;
        SpeedupRow row;
        row.benchmark = named.name;
        row.cls = named.expected_class;
        row.grid = named.profile.grid_size;
        row.n = n;

        const ModelParams params = to_model_params(cfg, named.profile, n);
        if (cfg.clock == ClockMode::Virtual) {
            const std::vector<KernelProfile> ps(n, named.profile);
            row.native_us =
                simulate_native(ps, cfg.t_init, cfg.t_ctx_switch).makespan;
        } else {
            row.native_us = run_native_real(cfg, named.profile, n);
        }

        const BatchRun r = run_virtualized_batch(cfg, named.profile, n);
        row.virtualized_us = cfg.clock == ClockMode::Virtual
                                 ? r.virtual_turnaround_us
                                 : r.wall_turnaround_us;
        row.speedup = static_cast<double>(row.native_us) /
                      static_cast<double>(row.virtualized_us);
        row.model_speedup =
            static_cast<double>(t_total_no_vt(params)) /
            static_cast<double>(model_batch_time(named.profile, n));
        summary.rows.push_back(std::move(row));
    }
    return summary;
}

void write_report_csv(const BenchReport& r, std::ostream& out) {
    out << "benchmark,n,mode,clock,turnaround_us,pure_gpu_us,"
           "overhead_fraction,model_us,deviation_pct,speedup\n";
    for (const auto& row : r.rows)
        out << row.benchmark << ',' << row.n << ',' << to_string(row.mode)
            << ','
            << (row.clock == ClockMode::Virtual ? "virtual" : "real") << ','
            << row.turnaround_us << ',' << row.pure_gpu_us << ','
            << row.overhead_fraction << ',' << row.model_us << ','
            << row.deviation_pct << ',' << row.speedup << '\n';
}

void write_deviation_csv(const DeviationTable& t, std::ostream& out) {
    out << "benchmark,n,model_us,measured_us,deviation_pct\n";
    for (const auto& row : t.rows)
        out << t.benchmark << ',' << row.n << ',' << row.model_us << ','
            << row.measured_us << ',' << row.deviation_pct << '\n';
    out << "# mean_deviation_pct=" << t.mean_deviation_pct << '\n';
}

void write_overhead_csv(const OverheadCurve& c, std::ostream& out) {
    out << "bytes,turnaround_us,pure_gpu_us,overhead_us,overhead_fraction\n";
    for (const auto& row : c.rows)
        out << row.bytes << ',' << row.turnaround_us << ',' << row.pure_gpu_us
            << ',' << row.overhead_us << ',' << row.overhead_fraction << '\n';
}

void write_speedup_csv(const SpeedupSummary& s, std::ostream& out) {
    out << "benchmark,class,grid,n,native_us,virtualized_us,speedup,"
           "model_speedup\n";
    for (const auto& row : s.rows)
        out << row.benchmark << ',' << to_string(row.cls) << ',' << row.grid
            << ',' << row.n << ',' << row.native_us << ','
            << row.virtualized_us << ',' << row.speedup << ','
            << row.model_speedup << '\n';
}

void write_speedup_gnuplot(const std::string& csv_path, std::ostream& out) {
    out << "set datafile separator ','\n"
           "set style data histogram\n"
           "set style fill solid 0.8\n"
           "set boxwidth 0.8\n"
           "set ylabel 'speedup vs native sharing'\n"
           "set xtics rotate by -35\n"
           "set key top left\n"
           "plot '"
        << csv_path
        << "' every ::1 using 7:xtic(1) title 'measured', \\\n"
           "     '' every ::1 using 8 title 'model'\n";
}

} // namespace vgpu::bench
