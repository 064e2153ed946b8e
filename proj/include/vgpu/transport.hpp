#ifndef VGPU_TRANSPORT_HPP
#define VGPU_TRANSPORT_HPP

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vgpu/message.hpp"

namespace vgpu {

struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Every IPC constant and name pattern lives here.
struct IpcNames {
    // control plane: one named endpoint fanning requests into the daemon;
    // responses travel back per client connection
    static std::string endpoint(std::string_view instance);
    // data plane: one named region per client, "vgpu.<instance>.<client_id>"
    static std::string region(std::string_view instance,
                              std::uint32_t client_id);
};

struct ProtocolLimits {
    static constexpr std::size_t kQueueDepth = 64;  // OS queues clamp to the
                                                    // system maximum
    static constexpr std::size_t kMaxControlFrame = 8192;
};

// Fixed-size shared byte region: the data plane between one client and the
// daemon.
class DataRegion {
public:
    virtual ~DataRegion() = default;
    virtual std::uint8_t* data() = 0;
    virtual std::size_t size() const = 0;

    std::span<std::uint8_t> bytes() { return {data(), size()}; }
    std::span<const std::uint8_t> bytes() const {
        return {const_cast<DataRegion*>(this)->data(), size()};
    }
};

// Client side of the control plane.
class ClientChannel {
public:
    virtual ~ClientChannel() = default;
    virtual void send(const Message& m) = 0;  // blocks while the queue is full
    virtual std::optional<Message> recv(std::chrono::microseconds timeout) = 0;
    // Open the leased region.
    virtual void attach_lease(const LeaseInfo& lease) = 0;
    virtual DataRegion& region() = 0;  // valid after attach_lease
};

// One received frame plus the transport-level address it came from, so
// REQ can be answered before the sender holds a client id.
struct Inbound {
    Message msg;
    std::string origin;
};

// Daemon side: fan-in request stream, per-client response routing, and the
// per-slot data regions (all created before any client connects).
class DaemonTransport {
public:
    virtual ~DaemonTransport() = default;
    virtual std::optional<Inbound> recv(std::chrono::microseconds timeout) = 0;
    virtual void reply_origin(const std::string& origin, const Message& m) = 0;
    // Route responses for a slot to this peer; a later bind of the same
    // slot supersedes the old route.
    virtual void bind(std::uint32_t client_id, const std::string& origin) = 0;
    virtual void send(std::uint32_t client_id, const Message& m) = 0;
    virtual DataRegion& region(std::uint32_t client_id) = 0;
    virtual std::string region_name(std::uint32_t client_id) const = 0;
    virtual std::uint32_t max_clients() const = 0;
};

// ---- in-process loopback --------------------------------------------------

namespace detail {

class FrameQueue {
public:
    explicit FrameQueue(std::size_t depth) : depth_(depth) {}
    void push(std::vector<std::uint8_t> frame);
    std::optional<std::vector<std::uint8_t>> pop(
        std::chrono::microseconds timeout);
    void close();

private:
    std::mutex m_;
    std::condition_variable readable_, writable_;
    std::deque<std::vector<std::uint8_t>> q_;
    std::size_t depth_;
    bool closed_ = false;
};

} // namespace detail

// Deterministic in-process transport: one FIFO request queue into the
// daemon, one FIFO response queue per connection, byte regions in a name
// table. Frames cross the queues encoded, so loopback and OS transports
// exercise the same wire format.
class LoopbackHub {
public:
    explicit LoopbackHub(std::string instance = "loopback");

    std::unique_ptr<ClientChannel> connect();
    std::unique_ptr<DaemonTransport> bind_daemon(std::uint32_t max_clients,
                                                 std::uint64_t region_bytes);
    const std::string& instance() const { return instance_; }

private:
    friend class LoopbackChannel;
    friend class LoopbackDaemonTransport;

    struct Conn {
        std::uint64_t id;
        detail::FrameQueue to_client{ProtocolLimits::kQueueDepth};
    };

    struct RoutedFrame {
        std::uint64_t conn_id;
        std::vector<std::uint8_t> frame;
    };

    std::shared_ptr<Conn> find_conn(std::uint64_t id);
    void drop_conn(std::uint64_t id);
    void release_daemon();

    std::string instance_;
    std::mutex m_;
    std::uint64_t next_conn_ = 1;
    bool daemon_bound_ = false;
    std::map<std::uint64_t, std::shared_ptr<Conn>> conns_;
    std::map<std::string, std::shared_ptr<std::vector<std::uint8_t>>> regions_;

    struct RequestQueue {
        std::mutex m;
        std::condition_variable readable, writable;
        std::deque<RoutedFrame> q;
        bool closed = false;
    } requests_;

    void push_request(RoutedFrame f);
    std::optional<RoutedFrame> pop_request(std::chrono::microseconds timeout);
    std::shared_ptr<std::vector<std::uint8_t>> make_region(
        const std::string& name, std::uint64_t bytes);
    std::shared_ptr<std::vector<std::uint8_t>> find_region(
        const std::string& name);
};

// ---- OS transport (named local sockets + POSIX shared memory) --------------

std::unique_ptr<DaemonTransport> open_os_daemon_transport(
    const std::string& instance, std::uint32_t max_clients,
    std::uint64_t region_bytes);

std::unique_ptr<ClientChannel> open_os_client_channel(
    const std::string& instance);

// Best-effort removal of kernel objects left behind by a crashed daemon.
void unlink_os_instance(const std::string& instance,
                        std::uint32_t max_clients);

} // namespace vgpu

#endif
