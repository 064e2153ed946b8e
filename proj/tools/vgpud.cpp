// vgpud: the GPU virtualization manager daemon. Creates the per-client
// queues and shared-memory regions, then serves REQ/SND/STR/STP/RCV/RLS
// until interrupted. Per-task metrics land in a CSV on shutdown.

#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "vgpu/daemon.hpp"

namespace {
volatile std::sig_atomic_t g_stop = 0;
void on_signal(int) { g_stop = 1; }
} // namespace

int main(int argc, char** argv) {
    CLI::App app{"GPU virtualization manager (simulated device)"};

    vgpu::GvmConfig cfg;
    std::string clock = "virtual";
    std::string metrics_out;
    std::uint32_t barrier_size = 0;

    app.add_option("--instance", cfg.instance, "daemon instance name")
        ->capture_default_str();
    app.add_option("--clients", cfg.max_clients, "client slots")
        ->capture_default_str();
    app.add_option("--shm-bytes", cfg.per_client_shm_bytes,
                   "per-client region size")
        ->capture_default_str();
    app.add_option("--barrier-window", cfg.barrier_window,
                   "max wall microseconds a partial batch waits")
        ->capture_default_str();
    app.add_option("--barrier-size", barrier_size,
                   "tasks that trigger a flush (0 = clients)");
    app.add_option("--clock", clock, "virtual|real")->capture_default_str();
    app.add_option("--scale", cfg.scale,
                   "real-clock pacing: wall = scale * simulated")
        ->capture_default_str();
    app.add_option("--device-sms", cfg.device.num_sms, "streaming multiprocessors")
        ->capture_default_str();
    app.add_option("--device-max-kernels", cfg.device.max_concurrent_kernels,
                   "concurrent kernel limit")
        ->capture_default_str();
    app.add_option("--device-slots-per-sm", cfg.device.block_slots_per_sm,
                   "block slots per SM")
        ->capture_default_str();
    app.add_option("--t-init", cfg.t_init, "one-time context init, microseconds")
        ->capture_default_str();
    app.add_option("--t-ctx-switch", cfg.t_ctx_switch,
                   "context switch cost, microseconds (reporting only)")
        ->capture_default_str();
    app.add_option("--metrics-out", metrics_out, "CSV written on shutdown");

    CLI11_PARSE(app, argc, argv);

    if (clock == "virtual") {
        cfg.clock = vgpu::ClockMode::Virtual;
    } else if (clock == "real") {
        cfg.clock = vgpu::ClockMode::Real;
    } else {
        std::cerr << "vgpud: --clock must be virtual or real\n";
        return 2;
    }
    cfg.barrier_size = barrier_size;

    std::unique_ptr<vgpu::GvmDaemon> daemon;
    try {
        daemon = vgpu::GvmDaemon::start_os(cfg);
    } catch (const std::exception& e) {
        std::cerr << "vgpud: " << e.what() << '\n';
        return 1;
    }

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << "vgpud: instance '" << cfg.instance << "' serving "
              << cfg.max_clients << " clients\n";

    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));

    daemon->stop();
    const vgpu::MetricsSnapshot m = daemon->metrics();
    if (!metrics_out.empty()) {
        std::ofstream out(metrics_out);
        if (!out) {
            std::cerr << "vgpud: cannot write " << metrics_out << '\n';
            return 1;
        }
        vgpu::write_metrics_csv(m, out);
    } else {
        vgpu::write_metrics_csv(m, std::cout);
    }
    return 0;
}
