#ifndef VGPU_CLIENT_HPP
#define VGPU_CLIENT_HPP

#include <memory>
#include <optional>
#include <span>
#include <string>

#include "vgpu/daemon.hpp"
#include "vgpu/message.hpp"
#include "vgpu/payload.hpp"
#include "vgpu/transport.hpp"

namespace vgpu {

// A daemon NACK or a client-side protocol violation, carrying the wire
// error code verbatim.
class VgpuError : public std::runtime_error {
public:
    VgpuError(ErrCode code, const std::string& detail)
        : std::runtime_error(detail), code_(code) {}
    ErrCode code() const { return code_; }

private:
    ErrCode code_;
};

// The per-process virtual GPU. One handle per process/thread; calls block
// until the daemon answers. Call order mirrors the daemon's session
// machine, and orders that are locally known to be illegal fail before a
// frame is sent.
class VgpuHandle {
public:
    explicit VgpuHandle(std::unique_ptr<ClientChannel> channel);
    ~VgpuHandle();
    VgpuHandle(VgpuHandle&&) noexcept;
    VgpuHandle& operator=(VgpuHandle&&) noexcept;
    VgpuHandle(const VgpuHandle&) = delete;
    VgpuHandle& operator=(const VgpuHandle&) = delete;

    void snd(std::span<const std::uint8_t> data);
    void str(const KernelDescriptor& task);
    bool stp();       // one-shot poll: true exactly when the task is done
    void stp_wait();  // poll with 100us backoff doubling to 10ms
    Bytes rcv();
    void rls();
    Bytes run_task(std::span<const std::uint8_t> data,
                   const KernelDescriptor& task);

    std::uint32_t client_id() const { return lease_.client_id; }
    const LeaseInfo& lease() const { return lease_; }
    Phase phase() const { return phase_; }

private:
    Message roundtrip(const Message& request);
    void require(bool ok, const char* what);

    std::unique_ptr<ClientChannel> channel_;
    LeaseInfo lease_;
    Phase phase_ = Phase::Idle;
    std::uint64_t next_task_ = 1;
};

// Lease a VGPU from a daemon over the in-process loopback (tests/CI).
VgpuHandle req(LoopbackHub& hub);

// Lease a VGPU from a running daemon over the OS transport. An empty
// instance falls back to $VGPU_INSTANCE, then "default".
VgpuHandle req(const std::string& instance = "");

// ---- daemon-less baseline ------------------------------------------------

struct NativeConfig {
    Micros t_init = 150000;
    Micros t_ctx_switch = 5000;
    ClockMode clock = ClockMode::Virtual;
    double scale = 1.0;
    // lock file serializing device access across native processes
    std::string lock_path = "/tmp/vgpu-native.lock";
};

// Same call surface as VgpuHandle, no daemon: each instance owns its own
// "context" (pays t_init on first use) and device access serializes with a
// context switch between holders, which is exactly the conventional
// sharing scheme. A benchmark switches between this and the virtualized
// path without restructuring.
class NativeVgpu {
public:
    explicit NativeVgpu(NativeConfig cfg = {},
                        const PayloadRegistry* payloads = nullptr);
    ~NativeVgpu();
    NativeVgpu(NativeVgpu&&) noexcept;
    NativeVgpu& operator=(NativeVgpu&&) noexcept;

    void snd(std::span<const std::uint8_t> data);
    void str(const KernelDescriptor& task);
    bool stp();
    void stp_wait();
    Bytes rcv();
    void rls();
    Bytes run_task(std::span<const std::uint8_t> data,
                   const KernelDescriptor& task);

    Phase phase() const { return phase_; }

private:
    NativeConfig cfg_;
    const PayloadRegistry* payloads_;
    Phase phase_ = Phase::Leased;
    Bytes input_;
    Bytes output_;
    int lock_fd_ = -1;
};

} // namespace vgpu

#endif
