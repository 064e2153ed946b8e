#include <cstring>
#include <thread>

#include "doctest.h"
#include "oracle.hpp"
#include "vgpu/client.hpp"

using namespace vgpu;
using namespace std::chrono_literals;

namespace {

GvmConfig quick_config(std::uint32_t clients, std::uint32_t barrier) {
    GvmConfig g;
    g.max_clients = clients;
    g.barrier_size = barrier;
    g.barrier_window = 2000;
    g.per_client_shm_bytes = 1 << 16;
    g.t_init = 100;
    return g;
}

Bytes vec_input(std::initializer_list<float> a, std::initializer_list<float> b) {
    std::vector<float> v(a);
    v.insert(v.end(), b);
    Bytes out(v.size() * 4);
    std::memcpy(out.data(), v.data(), out.size());
    return out;
}

KernelDescriptor vecadd_task() {
    KernelDescriptor d;
    d.payload_id = "vector-add";
    d.t_data_in = 60;
    d.t_comp = 20;
    d.t_data_out = 40;
    return d;
}

} // namespace

TEST_CASE("run_task returns the payload output") {
    LoopbackHub hub;
    auto daemon = GvmDaemon::start_loopback(quick_config(1, 1), hub);
    VgpuHandle h = req(hub);
    CHECK(h.client_id() == 1);
    CHECK(h.phase() == Phase::Leased);

    const Bytes out = h.run_task(vec_input({1.f, 2.f}, {3.f, 4.f}), vecadd_task());
    float vals[2];
    std::memcpy(vals, out.data(), 8);
    CHECK(vals[0] == 4.f);
    CHECK(vals[1] == 6.f);

    // the handle cycles back to leased and can run another task
    const Bytes out2 =
        h.run_task(vec_input({5.f, 6.f}, {7.f, 8.f}), vecadd_task());
    std::memcpy(vals, out2.data(), 8);
    CHECK(vals[0] == 12.f);
    h.rls();
    CHECK(h.phase() == Phase::Released);
}

TEST_CASE("illegal call orders fail client-side") {
    LoopbackHub hub;
    auto daemon = GvmDaemon::start_loopback(quick_config(1, 1), hub);
    VgpuHandle h = req(hub);

    CHECK_THROWS_AS((void)h.rcv(), VgpuError);          // rcv before done
    CHECK_THROWS_AS((void)h.stp(), VgpuError);          // stp before str
    CHECK_THROWS_AS(h.str(vecadd_task()), VgpuError);   // str before snd

    try {
        (void)h.rcv();
    } catch (const VgpuError& e) {
        CHECK(e.code() == ErrCode::Phase);
    }

    h.rls();
    CHECK_THROWS_AS(h.snd(Bytes{1}), VgpuError);  // dead handle
}

TEST_CASE("oversized snd fails before any frame is sent") {
    LoopbackHub hub;
    auto daemon = GvmDaemon::start_loopback(quick_config(1, 1), hub);
    VgpuHandle h = req(hub);
    const Bytes big((1 << 16) + 1);
    CHECK_THROWS_AS(h.snd(big), VgpuError);
    try {
        h.snd(big);
    } catch (const VgpuError& e) {
        CHECK(e.code() == ErrCode::Size);
    }
}

TEST_CASE("snd twice overwrites the staged data") {
    LoopbackHub hub;
    auto daemon = GvmDaemon::start_loopback(quick_config(1, 1), hub);
    VgpuHandle h = req(hub);
    h.snd(vec_input({9.f, 9.f}, {9.f, 9.f}));
    h.snd(vec_input({1.f, 1.f}, {2.f, 2.f}));  // second snd wins
    h.str(vecadd_task());
    h.stp_wait();
    const Bytes out = h.rcv();
    float vals[2];
    std::memcpy(vals, out.data(), 8);
    CHECK(vals[0] == 3.f);
}

TEST_CASE("req fails when all slots are taken") {
    LoopbackHub hub;
    auto daemon = GvmDaemon::start_loopback(quick_config(1, 1), hub);
    VgpuHandle h = req(hub);
    CHECK_THROWS_AS((void)req(hub), VgpuError);
}

TEST_CASE("NACK codes surface verbatim") {
    LoopbackHub hub;
    auto daemon = GvmDaemon::start_loopback(quick_config(1, 1), hub);
    VgpuHandle h = req(hub);
    h.snd(Bytes{1, 2, 3});  // malformed for vector-add
    h.str(vecadd_task());
    try {
        h.stp_wait();
        FAIL("expected the payload failure to surface");
    } catch (const VgpuError& e) {
        CHECK(e.code() == ErrCode::Payload);
    }
}

TEST_CASE("concurrent handles stay isolated") {
    LoopbackHub hub;
    auto daemon = GvmDaemon::start_loopback(quick_config(4, 4), hub);
    std::vector<std::thread> threads;
    std::vector<std::string> errors(4);
    for (int i = 0; i < 4; ++i) {
        threads.emplace_back([&, i] {
            try {
                VgpuHandle h = req(hub);
                const float base = static_cast<float>(i + 1);
                const Bytes out = h.run_task(
                    vec_input({base, base * 2}, {10.f, 20.f}), vecadd_task());
                float vals[2];
                std::memcpy(vals, out.data(), 8);
                if (vals[0] != base + 10.f || vals[1] != base * 2 + 20.f)
                    errors[i] = "wrong payload result";
                h.rls();
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (const auto& e : errors) CHECK(e.empty());
}

TEST_CASE("native runner exposes the same surface") {
    NativeConfig cfg;
    cfg.clock = ClockMode::Virtual;
    NativeVgpu h{cfg};

    const Bytes out = h.run_task(vec_input({1.f, 2.f}, {3.f, 4.f}), vecadd_task());
    float vals[2];
    std::memcpy(vals, out.data(), 8);
    CHECK(vals[0] == 4.f);

    CHECK_THROWS_AS((void)h.rcv(), VgpuError);
    h.rls();
    CHECK_THROWS_AS(h.snd(Bytes{1}), VgpuError);
}

// the porting claim: one worker body drives either backend
namespace {
template <class Handle>
Bytes worker_body(Handle& h, const Bytes& input, const KernelDescriptor& task) {
    h.snd(input);
    h.str(task);
    h.stp_wait();
    return h.rcv();
}
} // namespace

TEST_CASE("one worker body runs against daemon and native backends") {
    const Bytes input = vec_input({2.f, 4.f}, {1.f, 1.f});

    LoopbackHub hub;
    auto daemon = GvmDaemon::start_loopback(quick_config(1, 1), hub);
    VgpuHandle virt = req(hub);
    const Bytes a = worker_body(virt, input, vecadd_task());

    NativeVgpu native{NativeConfig{}};
    const Bytes b = worker_body(native, input, vecadd_task());

    CHECK(a == b);
}
