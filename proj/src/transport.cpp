#include "vgpu/transport.hpp"

#include <cstring>

namespace vgpu {

std::string IpcNames::endpoint(std::string_view instance) {
    return "/tmp/vgpu." + std::string(instance) + ".sock";
}

std::string IpcNames::region(std::string_view instance,
                             std::uint32_t client_id) {
    return "/vgpu." + std::string(instance) + "." + std::to_string(client_id);
}

namespace detail {

void FrameQueue::push(std::vector<std::uint8_t> frame) {
    std::unique_lock lk(m_);
    writable_.wait(lk, [&] { return q_.size() < depth_ || closed_; });
    if (closed_) throw TransportError("channel closed");
    q_.push_back(std::move(frame));
    readable_.notify_one();
}

std::optional<std::vector<std::uint8_t>> FrameQueue::pop(
    std::chrono::microseconds timeout) {
    std::unique_lock lk(m_);
    if (!readable_.wait_for(lk, timeout, [&] { return !q_.empty() || closed_; }))
        return std::nullopt;
    if (q_.empty()) return std::nullopt;  // closed and drained
    auto f = std::move(q_.front());
    q_.pop_front();
    writable_.notify_one();
    return f;
}

void FrameQueue::close() {
    std::lock_guard lk(m_);
    closed_ = true;
    readable_.notify_all();
    writable_.notify_all();
}

} // namespace detail

namespace {

Message decode_or_throw(std::span<const std::uint8_t> frame) {
    auto result = decode(frame);
    if (auto* err = std::get_if<DecodeError>(&result))
        throw TransportError(std::string("bad frame on loopback: ") +
                             to_string(*err));
    return std::get<Message>(std::move(result));
}

class LocalRegion final : public DataRegion {
public:
    explicit LocalRegion(std::shared_ptr<std::vector<std::uint8_t>> store)
        : store_(std::move(store)) {}
    std::uint8_t* data() override { return store_->data(); }
    std::size_t size() const override { return store_->size(); }

private:
    std::shared_ptr<std::vector<std::uint8_t>> store_;
};

} // namespace

class LoopbackChannel final : public ClientChannel {
public:
    LoopbackChannel(LoopbackHub& hub, std::shared_ptr<LoopbackHub::Conn> conn)
        : hub_(hub), conn_(std::move(conn)) {}

    ~LoopbackChannel() override {
        conn_->to_client.close();
        hub_.drop_conn(conn_->id);
    }

    void send(const Message& m) override {
        hub_.push_request({conn_->id, encode(m)});
    }

    std::optional<Message> recv(std::chrono::microseconds timeout) override {
        auto frame = conn_->to_client.pop(timeout);
        if (!frame) return std::nullopt;
        return decode_or_throw(*frame);
    }

    void attach_lease(const LeaseInfo& lease) override {
        auto store = hub_.find_region(lease.shm_name);
        if (!store)
            throw TransportError("leased region not found: " + lease.shm_name);
        region_ = std::make_unique<LocalRegion>(std::move(store));
    }

    DataRegion& region() override {
        if (!region_) throw TransportError("no lease attached");
        return *region_;
    }

private:
    LoopbackHub& hub_;
    std::shared_ptr<LoopbackHub::Conn> conn_;
    std::unique_ptr<LocalRegion> region_;
};

class LoopbackDaemonTransport final : public DaemonTransport {
public:
    LoopbackDaemonTransport(LoopbackHub& hub, std::uint32_t max_clients,
                            std::uint64_t region_bytes)
        : hub_(hub), max_clients_(max_clients) {
        for (std::uint32_t slot = 1; slot <= max_clients; ++slot) {
            const auto name = IpcNames::region(hub.instance(), slot);
            regions_.push_back(std::make_unique<LocalRegion>(
                hub_.make_region(name, region_bytes)));
            region_names_.push_back(name);
        }
    }

    ~LoopbackDaemonTransport() override { hub_.release_daemon(); }

    std::optional<Inbound> recv(std::chrono::microseconds timeout) override {
        auto routed = hub_.pop_request(timeout);
        if (!routed) return std::nullopt;
        return Inbound{decode_or_throw(routed->frame),
                       "conn:" + std::to_string(routed->conn_id)};
    }

    void reply_origin(const std::string& origin, const Message& m) override {
        const std::uint64_t conn_id = parse_conn(origin);
        if (auto conn = hub_.find_conn(conn_id)) conn->to_client.push(encode(m));
    }

    void bind(std::uint32_t client_id, const std::string& origin) override {
        bound_[client_id] = parse_conn(origin);
    }


    void send(std::uint32_t client_id, const Message& m) override {
        auto it = bound_.find(client_id);
        if (it == bound_.end()) return;  // client already gone
        if (auto conn = hub_.find_conn(it->second))
            conn->to_client.push(encode(m));
    }

    DataRegion& region(std::uint32_t client_id) override {
        return *regions_.at(client_id - 1);
    }

    std::string region_name(std::uint32_t client_id) const override {
        return region_names_.at(client_id - 1);
    }

    std::uint32_t max_clients() const override { return max_clients_; }

private:
    static std::uint64_t parse_conn(const std::string& origin) {
        if (origin.rfind("conn:", 0) != 0)
            throw TransportError("bad loopback origin: " + origin);
        return std::stoull(origin.substr(5));
    }

    LoopbackHub& hub_;
    std::uint32_t max_clients_;
    std::vector<std::unique_ptr<LocalRegion>> regions_;
    std::vector<std::string> region_names_;
    std::map<std::uint32_t, std::uint64_t> bound_;
};

LoopbackHub::LoopbackHub(std::string instance)
    : instance_(std::move(instance)) {}

std::unique_ptr<ClientChannel> LoopbackHub::connect() {
    auto conn = std::make_shared<Conn>();
    {
        std::lock_guard lk(m_);
        conn->id = next_conn_++;
        conns_[conn->id] = conn;
    }
    return std::make_unique<LoopbackChannel>(*this, std::move(conn));
}

std::unique_ptr<DaemonTransport> LoopbackHub::bind_daemon(
    std::uint32_t max_clients, std::uint64_t region_bytes) {
    {
        std::lock_guard lk(m_);
        if (daemon_bound_)
            throw TransportError("loopback instance '" + instance_ +
                                 "' already has a daemon");
        daemon_bound_ = true;
    }
    return std::make_unique<LoopbackDaemonTransport>(*this, max_clients,
                                                     region_bytes);
}

std::shared_ptr<LoopbackHub::Conn> LoopbackHub::find_conn(std::uint64_t id) {
    std::lock_guard lk(m_);
    auto it = conns_.find(id);
    return it == conns_.end() ? nullptr : it->second;
}

void LoopbackHub::drop_conn(std::uint64_t id) {
    std::lock_guard lk(m_);
    conns_.erase(id);
}

void LoopbackHub::release_daemon() {
    std::lock_guard lk(m_);
    daemon_bound_ = false;
}

void LoopbackHub::push_request(RoutedFrame f) {
    std::unique_lock lk(requests_.m);
    requests_.writable.wait(lk, [&] {
        return requests_.q.size() < ProtocolLimits::kQueueDepth ||
               requests_.closed;
    });
    if (requests_.closed) throw TransportError("daemon request queue closed");
    requests_.q.push_back(std::move(f));
    requests_.readable.notify_one();
}

std::optional<LoopbackHub::RoutedFrame> LoopbackHub::pop_request(
    std::chrono::microseconds timeout) {
    std::unique_lock lk(requests_.m);
    if (!requests_.readable.wait_for(lk, timeout,
                                     [&] { return !requests_.q.empty(); }))
        return std::nullopt;
    auto f = std::move(requests_.q.front());
    requests_.q.pop_front();
    requests_.writable.notify_one();
    return f;
}

std::shared_ptr<std::vector<std::uint8_t>> LoopbackHub::make_region(
    const std::string& name, std::uint64_t bytes) {
    std::lock_guard lk(m_);
    auto store = std::make_shared<std::vector<std::uint8_t>>(bytes);
    regions_[name] = store;
    return store;
}

std::shared_ptr<std::vector<std::uint8_t>> LoopbackHub::find_region(
    const std::string& name) {
    std::lock_guard lk(m_);
    auto it = regions_.find(name);
    return it == regions_.end() ? nullptr : it->second;
}

} // namespace vgpu
