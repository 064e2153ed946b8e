#include "vgpu/client.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdlib>
#include <cstring>
#include <thread>

#include "pacing.hpp"

namespace vgpu {

namespace {

constexpr std::chrono::microseconds kReplyTimeout{30'000'000};

Message expect_reply(ClientChannel& ch) {
    auto m = ch.recv(kReplyTimeout);
    if (!m) throw VgpuError(ErrCode::Internal, "daemon reply timed out");
    return *std::move(m);
}

[[noreturn]] void throw_nack(const Message& m) {
    if (auto info = parse_nack(m.payload))
        throw VgpuError(info->code, info->detail);
    throw VgpuError(ErrCode::Internal, "malformed NACK");
}

} // namespace

VgpuHandle::VgpuHandle(std::unique_ptr<ClientChannel> channel)
    : channel_(std::move(channel)) {
    channel_->send({Opcode::Req, 0, 0, {}});
    Message reply = expect_reply(*channel_);
    if (reply.opcode == Opcode::Nack) throw_nack(reply);
    auto lease = parse_lease(reply.payload);
    if (!lease) throw VgpuError(ErrCode::Internal, "malformed lease");
    lease_ = *std::move(lease);
    channel_->attach_lease(lease_);
    phase_ = Phase::Leased;
}

VgpuHandle::~VgpuHandle() {
    if (!channel_) return;
    try {
        if (phase_ != Phase::Idle && phase_ != Phase::Released) rls();
    } catch (...) {
        // lease dies with the daemon or transport; nothing left to do
    }
}

VgpuHandle::VgpuHandle(VgpuHandle&&) noexcept = default;
VgpuHandle& VgpuHandle::operator=(VgpuHandle&&) noexcept = default;

void VgpuHandle::require(bool ok, const char* what) {
    if (!ok)
        throw VgpuError(ErrCode::Phase, std::string(what) + " illegal in phase " +
                                            to_string(phase_));
}

Message VgpuHandle::roundtrip(const Message& request) {
    channel_->send(request);
    Message reply = expect_reply(*channel_);
    if (reply.task_id != request.task_id)
        throw VgpuError(ErrCode::Internal, "reply for unexpected task");
    return reply;
}

void VgpuHandle::snd(std::span<const std::uint8_t> data) {
    require(phase_ == Phase::Leased || phase_ == Phase::DataIn, "SND");
    if (data.size() > lease_.shm_bytes)
        throw VgpuError(ErrCode::Size, "data exceeds leased region");
    std::memcpy(channel_->region().data(), data.data(), data.size());
    Message reply = roundtrip(
        {Opcode::Snd, lease_.client_id, 0, encode_u64(data.size())});
    if (reply.opcode == Opcode::Nack) throw_nack(reply);
    phase_ = Phase::DataIn;
}

void VgpuHandle::str(const KernelDescriptor& task) {
    require(phase_ == Phase::DataIn, "STR");
    const std::uint64_t task_id = next_task_++;
    phase_ = Phase::Queued;
    Message reply = roundtrip(
        {Opcode::Str, lease_.client_id, task_id, encode_descriptor(task)});
    if (reply.opcode == Opcode::Nack) {
        phase_ = Phase::DataIn;
        throw_nack(reply);
    }
    phase_ = Phase::Running;  // the ACK arrives at dispatch
}

bool VgpuHandle::stp() {
    require(phase_ == Phase::Running || phase_ == Phase::Done, "STP");
    Message reply =
        roundtrip({Opcode::Stp, lease_.client_id, next_task_ - 1, {}});
    if (reply.opcode == Opcode::Ack) {
        phase_ = Phase::Done;
        return true;
    }
    auto info = parse_nack(reply.payload);
    if (info && info->code == ErrCode::Pending) return false;
    throw_nack(reply);
}

void VgpuHandle::stp_wait() {
    std::chrono::microseconds backoff{100};
    while (!stp()) {
        std::this_thread::sleep_for(backoff);
        backoff = std::min(backoff * 2, std::chrono::microseconds{10'000});
    }
}

Bytes VgpuHandle::rcv() {
    require(phase_ == Phase::Done, "RCV");
    Message reply =
        roundtrip({Opcode::Rcv, lease_.client_id, next_task_ - 1, {}});
    if (reply.opcode == Opcode::Nack) throw_nack(reply);
    auto len = parse_u64(reply.payload);
    if (!len || *len > lease_.shm_bytes)
        throw VgpuError(ErrCode::Internal, "bad RCV length");
    const auto* base = channel_->region().data();
    phase_ = Phase::Leased;
    return Bytes(base, base + *len);
}

void VgpuHandle::rls() {
    require(phase_ != Phase::Idle && phase_ != Phase::Released, "RLS");
    Message reply = roundtrip({Opcode::Rls, lease_.client_id, 0, {}});
    if (reply.opcode == Opcode::Nack) throw_nack(reply);
    phase_ = Phase::Released;
}

Bytes VgpuHandle::run_task(std::span<const std::uint8_t> data,
                           const KernelDescriptor& task) {
    snd(data);
    str(task);
    stp_wait();
    return rcv();
}

VgpuHandle req(LoopbackHub& hub) { return VgpuHandle(hub.connect()); }

VgpuHandle req(const std::string& instance) {
    std::string name = instance;
    if (name.empty()) {
        const char* env = std::getenv("VGPU_INSTANCE");
        name = env && *env ? env : "default";
    }
    return VgpuHandle(open_os_client_channel(name));
}

// ---- native baseline -------------------------------------------------------

NativeVgpu::NativeVgpu(NativeConfig cfg, const PayloadRegistry* payloads)
    : cfg_(std::move(cfg)),
      payloads_(payloads ? payloads : &PayloadRegistry::builtins()) {}

NativeVgpu::~NativeVgpu() {
    if (lock_fd_ >= 0) close(lock_fd_);
}

NativeVgpu::NativeVgpu(NativeVgpu&& other) noexcept
    : cfg_(std::move(other.cfg_)),
      payloads_(other.payloads_),
      phase_(other.phase_),
      input_(std::move(other.input_)),
      output_(std::move(other.output_)),
      lock_fd_(other.lock_fd_) {
    other.lock_fd_ = -1;
}

NativeVgpu& NativeVgpu::operator=(NativeVgpu&& other) noexcept {
    if (this != &other) {
        if (lock_fd_ >= 0) close(lock_fd_);
        cfg_ = std::move(other.cfg_);
        payloads_ = other.payloads_;
        phase_ = other.phase_;
        input_ = std::move(other.input_);
        output_ = std::move(other.output_);
        lock_fd_ = other.lock_fd_;
        other.lock_fd_ = -1;
    }
    return *this;
}

void NativeVgpu::snd(std::span<const std::uint8_t> data) {
    if (phase_ == Phase::Released)
        throw VgpuError(ErrCode::Phase, "handle released");
    input_.assign(data.begin(), data.end());
    phase_ = Phase::DataIn;
}

void NativeVgpu::str(const KernelDescriptor& task) {
    if (phase_ != Phase::DataIn)
        throw VgpuError(ErrCode::Phase, "STR before SND");

    if (cfg_.clock == ClockMode::Real) {
        // exclusive device: whole cycles serialize across processes, with a
        // context switch whenever the device changes hands
        if (lock_fd_ < 0) {
            lock_fd_ = open(cfg_.lock_path.c_str(), O_RDWR | O_CREAT, 0600);
            if (lock_fd_ < 0)
                throw VgpuError(ErrCode::Internal, "cannot open native lock");
        }
        flock(lock_fd_, LOCK_EX);
        char used = 0;
        if (pread(lock_fd_, &used, 1, 0) == 1 && used == 1) {
            detail::sleep_until_precise(
                std::chrono::steady_clock::now() +
                std::chrono::microseconds(static_cast<std::int64_t>(
                    static_cast<double>(cfg_.t_ctx_switch) * cfg_.scale)));
        } else {
            used = 1;
            if (pwrite(lock_fd_, &used, 1, 0) != 1) {
                // marker write failed: next holder just skips the switch cost
            }
        }
        const Micros cycle =
            cfg_.t_init + task.t_data_in + task.t_comp + task.t_data_out;
        detail::sleep_until_precise(
            std::chrono::steady_clock::now() +
            std::chrono::microseconds(static_cast<std::int64_t>(
                static_cast<double>(cycle) * cfg_.scale)));
    }

    output_ = payloads_->execute(task.payload_id, input_);
    if (cfg_.clock == ClockMode::Real) flock(lock_fd_, LOCK_UN);
    phase_ = Phase::Done;
}

bool NativeVgpu::stp() {
    if (phase_ != Phase::Done && phase_ != Phase::Running)
        throw VgpuError(ErrCode::Phase, "STP before STR");
    return phase_ == Phase::Done;
}

void NativeVgpu::stp_wait() { (void)stp(); }

Bytes NativeVgpu::rcv() {
    if (phase_ != Phase::Done) throw VgpuError(ErrCode::Phase, "RCV before done");
    phase_ = Phase::Leased;
    return std::move(output_);
}

void NativeVgpu::rls() { phase_ = Phase::Released; }

Bytes NativeVgpu::run_task(std::span<const std::uint8_t> data,
                           const KernelDescriptor& task) {
    snd(data);
    str(task);
    stp_wait();
    return rcv();
}

} // namespace vgpu
