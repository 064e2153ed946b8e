#include "vgpu/daemon.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <cstring>
#include <deque>
#include <mutex>
#include <ostream>
#include <thread>

#include "vgpu/model.hpp"
#include "pacing.hpp"

namespace vgpu {

const char* to_string(Phase p) {
    switch (p) {
        case Phase::Idle: return "idle";
        case Phase::Leased: return "leased";
        case Phase::DataIn: return "data-in";
        case Phase::Queued: return "queued";
        case Phase::Running: return "running";
        case Phase::Done: return "done";
        case Phase::Released: return "released";
    }
    return "?";
}

void write_metrics_csv(const MetricsSnapshot& m, std::ostream& out) {
    out << "task_id,client_id,queue_wait_us,pure_gpu_us,end_to_end_us\n";
    for (const auto& t : m.tasks)
        out << t.task_id << ',' << t.client_id << ',' << t.queue_wait_us << ','
            << t.pure_gpu_us << ',' << t.end_to_end_us << '\n';
    out << "# uptime_us=" << m.uptime_us << " busy_us=" << m.busy_us
        << " t_init_us=" << m.t_init_us << " batches=" << m.batches_flushed
        << '\n';
}

namespace {

using Clock = std::chrono::steady_clock;

Micros wall_us_since(Clock::time_point from, Clock::time_point to) {
    return static_cast<Micros>(
        std::chrono::duration_cast<std::chrono::microseconds>(to - from)
            .count());
}

struct Session {
    Phase phase = Phase::Idle;
    std::uint64_t generation = 0;
    Bytes input;
    Bytes output;
    std::uint64_t current_task = 0;
    bool failed = false;
    ErrCode fail_code = ErrCode::Internal;
    std::string fail_detail;
};

struct PendingTask {
    std::uint64_t task_id = 0;
    std::uint32_t client_id = 0;
    std::uint64_t generation = 0;
    KernelProfile profile;
    Bytes input;
    Micros arrival_v = 0;
    Clock::time_point arrival_wall;
};

// One finished task coming back from the pacing thread.
struct Completion {
    std::uint32_t client_id = 0;
    std::uint64_t generation = 0;
    std::uint64_t task_id = 0;
    Bytes output;
    bool failed = false;
    ErrCode fail_code = ErrCode::Internal;
    std::string fail_detail;
    TaskMetrics metrics;
};

struct PacedTask {
    std::uint32_t client_id;
    std::uint64_t generation;
    std::uint64_t task_id;
    Bytes output;
    bool failed;
    ErrCode fail_code;
    std::string fail_detail;
    Micros start_offset;
    Micros end_offset;
    Micros queue_wait_us;
    Clock::time_point arrival_wall;
};

struct PacedBatch {
    std::uint64_t batch_id;
    ProgrammingStyle style;
    Micros makespan;
    std::vector<PacedTask> tasks;
};

} // namespace

struct GvmDaemon::Impl {
    GvmConfig cfg;
    std::unique_ptr<DaemonTransport> transport;
    const PayloadRegistry* payloads;

    std::thread dispatcher;
    std::thread completer;
    std::atomic<bool> running{true};

    std::vector<Session> sessions;  // index = client_id - 1

    // open barrier batch
    std::vector<PendingTask> batch;
    Clock::time_point batch_opened;

    // virtual device clock; starts after the one-time init charge
    Micros vnow = 0;

    std::uint64_t next_batch_id = 1;
    Clock::time_point started;

    // metrics, guarded for external snapshots
    mutable std::mutex metrics_mu;
    std::vector<TaskMetrics> task_metrics;
    std::vector<BatchMetrics> batch_metrics;
    std::uint64_t batches_flushed = 0;
    Micros busy_us = 0;

    // pacing lane (real clock)
    std::mutex pace_mu;
    std::condition_variable pace_cv;
    std::deque<PacedBatch> pace_in;
    std::deque<Completion> completions;

    explicit Impl(GvmConfig c, std::unique_ptr<DaemonTransport> t,
                  const PayloadRegistry* p)
        : cfg(std::move(c)),
          transport(std::move(t)),
          payloads(p ? p : &PayloadRegistry::builtins()),
          sessions(cfg.max_clients) {
        vnow = cfg.t_init;
        started = Clock::now();
    }

    Session* session_for(std::uint32_t client_id) {
        if (client_id < 1 || client_id > cfg.max_clients) return nullptr;
        return &sessions[client_id - 1];
    }

    bool leased(const Session& s) const {
        return s.phase != Phase::Idle && s.phase != Phase::Released;
    }

    void send_ack(std::uint32_t client_id, std::uint64_t task_id,
                  Bytes payload = {}) {
        transport->send(client_id,
                        {Opcode::Ack, client_id, task_id, std::move(payload)});
    }

    void send_nack(std::uint32_t client_id, std::uint64_t task_id, ErrCode code,
                   std::string_view detail) {
        transport->send(client_id, {Opcode::Nack, client_id, task_id,
                                    encode_nack(code, detail)});
    }

    // ---- verb handlers ----------------------------------------------------

    void handle(const Inbound& in) {
        const Message& m = in.msg;
        if (m.opcode == Opcode::Req) {
            handle_req(m, in.origin);
            return;
        }
        Session* s = session_for(m.client_id);
        if (!s) return;  // unroutable: no such slot exists
        if (!leased(*s)) {
            send_nack(m.client_id, m.task_id, ErrCode::NoLease,
                      "no lease for client");
            return;
        }
        switch (m.opcode) {
            case Opcode::Snd: handle_snd(m, *s); break;
            case Opcode::Str: handle_str(m, *s); break;
            case Opcode::Stp: handle_stp(m, *s); break;
            case Opcode::Rcv: handle_rcv(m, *s); break;
            case Opcode::Rls: handle_rls(m, *s); break;
            default:
                send_nack(m.client_id, m.task_id, ErrCode::Malformed,
                          "unexpected opcode");
        }
    }

    void handle_req(const Message& m, const std::string& origin) {
        std::uint32_t slot = 0;
        for (std::uint32_t i = 1; i <= cfg.max_clients; ++i) {
            if (!leased(sessions[i - 1])) {
                slot = i;
                break;
            }
        }
        if (slot == 0) {
            transport->reply_origin(
                origin, {Opcode::Nack, 0, m.task_id,
                         encode_nack(ErrCode::Full, "all client slots leased")});
            return;
        }
        Session& s = sessions[slot - 1];
        s = Session{};
        s.phase = Phase::Leased;
        s.generation = next_generation++;
        transport->bind(slot, origin);

        LeaseInfo lease;
        lease.client_id = slot;
        lease.shm_bytes = cfg.per_client_shm_bytes;
        lease.stream_hint = slot - 1;
        lease.shm_name = transport->region_name(slot);
        transport->reply_origin(
            origin, {Opcode::Ack, slot, m.task_id, encode_lease(lease)});
    }

    std::uint64_t next_generation = 1;

    void handle_snd(const Message& m, Session& s) {
        if (s.phase != Phase::Leased && s.phase != Phase::DataIn) {
            send_nack(m.client_id, m.task_id, ErrCode::Phase,
                      std::string("SND illegal in phase ") + to_string(s.phase));
            return;
        }
        const auto len = parse_u64(m.payload);
        if (!len) {
            send_nack(m.client_id, m.task_id, ErrCode::Malformed,
                      "SND payload must be a u64 length");
            return;
        }
        DataRegion& region = transport->region(m.client_id);
        if (*len > region.size()) {
            send_nack(m.client_id, m.task_id, ErrCode::Size,
                      "data exceeds leased region");
            return;
        }
        s.input.assign(region.data(), region.data() + *len);
        s.phase = Phase::DataIn;
        send_ack(m.client_id, m.task_id);
    }

    void handle_str(const Message& m, Session& s) {
        if (s.phase != Phase::DataIn) {
            send_nack(m.client_id, m.task_id, ErrCode::Phase,
                      std::string("STR illegal in phase ") + to_string(s.phase));
            return;
        }
        const auto d = parse_descriptor(m.payload);
        if (!d) {
            send_nack(m.client_id, m.task_id, ErrCode::Malformed,
                      "STR payload must be a kernel descriptor");
            return;
        }
        if (!payloads->contains(d->payload_id)) {
            send_nack(m.client_id, m.task_id, ErrCode::Payload,
                      "unknown payload id: " + d->payload_id);
            return;
        }
        constexpr Micros kMaxDuration = 1'000'000'000'000;  // keeps sums safe
        if (d->grid_size < 1 || d->t_data_in > kMaxDuration ||
            d->t_comp > kMaxDuration || d->t_data_out > kMaxDuration) {
            send_nack(m.client_id, m.task_id, ErrCode::Malformed,
                      "kernel descriptor out of range");
            return;
        }
        if (d->output_bytes > cfg.per_client_shm_bytes) {
            send_nack(m.client_id, m.task_id, ErrCode::Size,
                      "declared output exceeds leased region");
            return;
        }

        PendingTask task;
        task.task_id = m.task_id;
        task.client_id = m.client_id;
        task.generation = s.generation;
        task.profile.t_data_in = d->t_data_in;
        task.profile.t_comp = d->t_comp;
        task.profile.t_data_out = d->t_data_out;
        task.profile.grid_size = d->grid_size;
        task.profile.payload_id = d->payload_id;
        task.profile.input_bytes = s.input.size();
        task.profile.output_bytes = d->output_bytes;
        task.input = std::move(s.input);
        task.arrival_v = vnow;
        task.arrival_wall = Clock::now();

        if (batch.empty()) batch_opened = task.arrival_wall;
        batch.push_back(std::move(task));

        s.phase = Phase::Queued;
        s.current_task = m.task_id;
        // STR is acknowledged at dispatch, when the barrier flushes.

        if (batch.size() >= barrier_size()) flush_barrier();
    }

    void handle_stp(const Message& m, Session& s) {
        switch (s.phase) {
            case Phase::Done:
                send_ack(m.client_id, m.task_id);
                return;
            case Phase::Queued:
            case Phase::Running:
                if (s.failed)
                    send_nack(m.client_id, m.task_id, s.fail_code, s.fail_detail);
                else
                    send_nack(m.client_id, m.task_id, ErrCode::Pending,
                              "task not finished");
                return;
            default:
                send_nack(m.client_id, m.task_id, ErrCode::Phase,
                          std::string("STP illegal in phase ") +
                              to_string(s.phase));
        }
    }

    void handle_rcv(const Message& m, Session& s) {
        if (s.phase != Phase::Done) {
            send_nack(m.client_id, m.task_id, ErrCode::Phase,
                      std::string("RCV illegal in phase ") + to_string(s.phase));
            return;
        }
        DataRegion& region = transport->region(m.client_id);
        std::memcpy(region.data(), s.output.data(), s.output.size());
        send_ack(m.client_id, m.task_id, encode_u64(s.output.size()));
        s.output.clear();
        s.phase = Phase::Leased;  // ready for the next task
    }

    void handle_rls(const Message& m, Session& s) {
        s.phase = Phase::Released;
        s.generation = 0;  // in-flight work for this lease is dropped
        s.input.clear();
        s.output.clear();
        send_ack(m.client_id, m.task_id);
    }

    // ---- barrier ----------------------------------------------------------

    std::uint32_t barrier_size() const {
        return cfg.barrier_size == 0 ? cfg.max_clients : cfg.barrier_size;
    }

    ProgrammingStyle batch_style() const {
        std::uint32_t counts[3] = {0, 0, 0};
        for (const auto& t : batch)
            ++counts[static_cast<int>(classify_kernel(t.profile))];
        const std::uint32_t top = std::max({counts[0], counts[1], counts[2]});
        std::uint32_t winners = 0;
        KernelClass cls = KernelClass::ComputeIntensive;
        for (int i = 0; i < 3; ++i) {
            if (counts[i] == top) {
                ++winners;
                cls = static_cast<KernelClass>(i);
            }
        }
        if (winners > 1) return ProgrammingStyle::PS1;  // ties go to PS1
        return recommend_style(cls);
    }

    void flush_barrier() {
        if (batch.empty()) return;
        const ProgrammingStyle style = batch_style();

        std::vector<KernelProfile> profiles;
        std::vector<std::uint64_t> ids;
        profiles.reserve(batch.size());
        ids.reserve(batch.size());
        for (const auto& t : batch) {
            profiles.push_back(t.profile);
            ids.push_back(t.task_id);
        }
        const WorkQueue q = build_work_queue(style, profiles, ids);
        const Timeline tl = simulate(q, cfg.device);

        for (const auto& t : batch) {
            Session* s = session_for(t.client_id);
            if (s && s->generation == t.generation) s->phase = Phase::Running;
        }

        // run the payload function once per task
        const Clock::time_point dispatch_wall = Clock::now();
        PacedBatch paced;
        paced.batch_id = next_batch_id++;
        paced.style = style;
        paced.makespan = tl.makespan;
        for (auto& t : batch) {
            PacedTask pt;
            pt.client_id = t.client_id;
            pt.generation = t.generation;
            pt.task_id = t.task_id;
            pt.failed = false;
            pt.fail_code = ErrCode::Internal;
            pt.start_offset = tl.task_start(t.task_id);
            pt.end_offset = tl.task_end(t.task_id);
            pt.arrival_wall = t.arrival_wall;
            pt.queue_wait_us =
                cfg.clock == ClockMode::Virtual
                    ? vnow - t.arrival_v
                    : wall_us_since(t.arrival_wall, dispatch_wall);
            try {
                pt.output = payloads->execute(t.profile.payload_id, t.input);
                if (pt.output.size() > cfg.per_client_shm_bytes) {
                    pt.failed = true;
                    pt.fail_code = ErrCode::Size;
                    pt.fail_detail = "payload output exceeds leased region";
                    pt.output.clear();
                }
            } catch (const PayloadError& e) {
                pt.failed = true;
                pt.fail_code = ErrCode::Payload;
                pt.fail_detail = e.what();
            }
            paced.tasks.push_back(std::move(pt));
        }
        const std::vector<PendingTask> dispatched = std::move(batch);
        batch.clear();

        // Virtual clock: settle all bookkeeping before the STR acks go out,
        // so a client holding its ack sees consistent metrics. Real clock:
        // ack at dispatch, completion comes from the pacing lane.
        if (cfg.clock == ClockMode::Virtual) {
            complete_virtual(std::move(paced));
        } else {
            std::lock_guard lk(pace_mu);
            pace_in.push_back(std::move(paced));
            pace_cv.notify_one();
        }
        for (const auto& t : dispatched) send_ack(t.client_id, t.task_id);
    }

    void complete_virtual(PacedBatch paced) {
        std::vector<Completion> done;
        done.reserve(paced.tasks.size());
        for (auto& pt : paced.tasks) {
            Completion c;
            c.client_id = pt.client_id;
            c.generation = pt.generation;
            c.task_id = pt.task_id;
            c.output = std::move(pt.output);
            c.failed = pt.failed;
            c.fail_code = pt.fail_code;
            c.fail_detail = std::move(pt.fail_detail);
            c.metrics = {pt.task_id, pt.client_id, pt.queue_wait_us,
                         pt.end_offset - pt.start_offset,
                         pt.queue_wait_us + pt.end_offset};
            done.push_back(std::move(c));
        }
        vnow += paced.makespan;
        record_batch({paced.batch_id, paced.style,
                      static_cast<std::uint32_t>(done.size()), paced.makespan,
                      paced.makespan});
        for (auto& c : done) apply_completion(std::move(c));
    }

    void record_batch(BatchMetrics bm) {
        std::lock_guard lk(metrics_mu);
        busy_us += bm.model_makespan_us;
        ++batches_flushed;
        batch_metrics.push_back(bm);
    }

    void apply_completion(Completion c) {
        {
            std::lock_guard lk(metrics_mu);
            task_metrics.push_back(c.metrics);
        }
        Session* s = session_for(c.client_id);
        if (!s || s->generation != c.generation) return;  // lease is gone
        if (c.failed) {
            s->failed = true;
            s->fail_code = c.fail_code;
            s->fail_detail = std::move(c.fail_detail);
            return;  // phase stays; STP reports the failure
        }
        s->output = std::move(c.output);
        s->phase = Phase::Done;
    }

    void drain_completions() {
        std::deque<Completion> done;
        {
            std::lock_guard lk(pace_mu);
            done.swap(completions);
        }
        for (auto& c : done) apply_completion(std::move(c));
    }

    // ---- threads ----------------------------------------------------------

    void dispatcher_loop() {
        using namespace std::chrono;
        while (running.load(std::memory_order_relaxed)) {
            try {
                drain_completions();

                microseconds timeout{500};
                if (!batch.empty()) {
                    const auto elapsed =
                        wall_us_since(batch_opened, Clock::now());
                    if (elapsed >= cfg.barrier_window) {
                        flush_barrier();
                        continue;
                    }
                    timeout = microseconds{
                        std::min<Micros>(cfg.barrier_window - elapsed, 500)};
                }
                if (auto in = transport->recv(timeout)) handle(*in);
                if (!batch.empty() &&
                    wall_us_since(batch_opened, Clock::now()) >=
                        cfg.barrier_window)
                    flush_barrier();
            } catch (const std::exception& e) {
                // a bad frame or a vanished peer must not take the daemon down
                std::fprintf(stderr, "gvm: %s\n", e.what());
            }
        }
        // serve nothing further; leave queued state as-is
    }

    void completer_loop() {
        Clock::time_point device_free = Clock::now();
        for (;;) {
            PacedBatch paced;
            {
                std::unique_lock lk(pace_mu);
                pace_cv.wait(lk, [&] {
                    return !pace_in.empty() ||
                           !running.load(std::memory_order_relaxed);
                });
                if (pace_in.empty()) return;
                paced = std::move(pace_in.front());
                pace_in.pop_front();
            }

            const Clock::time_point t0 = std::max(Clock::now(), device_free);
            std::sort(paced.tasks.begin(), paced.tasks.end(),
                      [](const PacedTask& a, const PacedTask& b) {
                          return a.end_offset < b.end_offset;
                      });
            for (auto& pt : paced.tasks) {
                const auto deadline =
                    t0 + std::chrono::microseconds(static_cast<std::int64_t>(
                             static_cast<double>(pt.end_offset) * cfg.scale));
                detail::sleep_until_precise(deadline);
                const auto now = Clock::now();

                Completion c;
                c.client_id = pt.client_id;
                c.generation = pt.generation;
                c.task_id = pt.task_id;
                c.output = std::move(pt.output);
                c.failed = pt.failed;
                c.fail_code = pt.fail_code;
                c.fail_detail = std::move(pt.fail_detail);
                const Micros start_wall = static_cast<Micros>(
                    static_cast<double>(pt.start_offset) * cfg.scale);
                const Micros device_span = wall_us_since(t0, now);
                c.metrics = {pt.task_id, pt.client_id, pt.queue_wait_us,
                             device_span > start_wall ? device_span - start_wall
                                                      : Micros{0},
                             wall_us_since(pt.arrival_wall, now)};
                {
                    std::lock_guard lk(pace_mu);
                    completions.push_back(std::move(c));
                }
            }
            const auto now = Clock::now();
            record_batch({paced.batch_id, paced.style,
                          static_cast<std::uint32_t>(paced.tasks.size()),
                          paced.makespan, wall_us_since(t0, now)});
            device_free = now;
        }
    }
};

GvmDaemon::GvmDaemon(GvmConfig cfg, std::unique_ptr<DaemonTransport> transport,
                     const PayloadRegistry* payloads)
    : cfg_(cfg),
      impl_(std::make_unique<Impl>(std::move(cfg), std::move(transport),
                                   payloads)) {
    impl_->dispatcher = std::thread([this] { impl_->dispatcher_loop(); });
    if (impl_->cfg.clock == ClockMode::Real)
        impl_->completer = std::thread([this] { impl_->completer_loop(); });
}

namespace {

void validate_config(const GvmConfig& cfg) {
    if (cfg.max_clients < 1)
        throw std::invalid_argument("gvm: max_clients must be >= 1");
    if (cfg.barrier_size > cfg.max_clients)
        throw std::invalid_argument("gvm: barrier_size must be <= max_clients");
    if (cfg.scale <= 0.0)
        throw std::invalid_argument("gvm: scale must be positive");
}

} // namespace

std::unique_ptr<GvmDaemon> GvmDaemon::start(
    GvmConfig cfg, std::unique_ptr<DaemonTransport> transport,
    const PayloadRegistry* payloads) {
    validate_config(cfg);
    if (transport->max_clients() < cfg.max_clients)
        throw std::invalid_argument("gvm: transport has too few client slots");
    return std::unique_ptr<GvmDaemon>(
        new GvmDaemon(std::move(cfg), std::move(transport), payloads));
}

std::unique_ptr<GvmDaemon> GvmDaemon::start_loopback(GvmConfig cfg,
                                                     LoopbackHub& hub) {
    validate_config(cfg);
    auto transport =
        hub.bind_daemon(cfg.max_clients, cfg.per_client_shm_bytes);
    return start(std::move(cfg), std::move(transport));
}

std::unique_ptr<GvmDaemon> GvmDaemon::start_os(GvmConfig cfg) {
    validate_config(cfg);
    auto transport = open_os_daemon_transport(cfg.instance, cfg.max_clients,
                                              cfg.per_client_shm_bytes);
    return start(std::move(cfg), std::move(transport));
}

GvmDaemon::~GvmDaemon() { stop(); }

void GvmDaemon::stop() {
    if (!impl_->running.exchange(false)) return;
    impl_->pace_cv.notify_all();
    if (impl_->dispatcher.joinable()) impl_->dispatcher.join();
    if (impl_->completer.joinable()) impl_->completer.join();
}

MetricsSnapshot GvmDaemon::metrics() const {
    std::lock_guard lk(impl_->metrics_mu);
    MetricsSnapshot snap;
    snap.tasks = impl_->task_metrics;
    snap.batches = impl_->batch_metrics;
    snap.busy_us = impl_->busy_us;
    snap.t_init_us = impl_->cfg.t_init;
    snap.batches_flushed = impl_->batches_flushed;
    snap.uptime_us =
        impl_->cfg.clock == ClockMode::Virtual
            ? impl_->cfg.t_init + impl_->busy_us
            : wall_us_since(impl_->started, Clock::now());
    return snap;
}

} // namespace vgpu
