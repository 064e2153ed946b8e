#include <fcntl.h>
#include <poll.h>
#include <sys/mman.h>
#include <sys/socket.h>
#include <sys/stat.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "vgpu/transport.hpp"

// OS realization of the control/data planes. Control: one named local
// SEQPACKET socket per daemon instance; every client connection is a
// framed, ordered, reliable message queue in each direction, and requests
// fan in through the daemon's accept loop. Data: one POSIX shared-memory
// region per client slot, created by the daemon before any client
// connects.

namespace vgpu {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
    throw TransportError(what + ": " + std::strerror(errno));
}

void set_nonblocking(int fd) {
    const int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

bool wait_readable(int fd, std::chrono::microseconds timeout) {
    pollfd p{fd, POLLIN, 0};
    const timespec ts{
        static_cast<time_t>(timeout.count() / 1'000'000),
        static_cast<long>((timeout.count() % 1'000'000) * 1000)};
    for (;;) {
        const int rc = ppoll(&p, 1, &ts, nullptr);
        if (rc > 0) return true;
        if (rc == 0) return false;
        if (errno != EINTR) throw_errno("ppoll");
    }
}

class ShmRegion final : public DataRegion {
public:
    ShmRegion(const std::string& name, std::uint64_t bytes, bool owner)
        : name_(name), size_(bytes), owner_(owner) {
        const int oflag = owner ? O_CREAT | O_EXCL | O_RDWR : O_RDWR;
        const int fd = shm_open(name.c_str(), oflag, 0600);
        if (fd < 0) {
            if (errno == ENOENT)
                throw TransportError("region missing: " + name);
            if (errno == EEXIST)
                throw TransportError("region already exists: " + name);
            throw_errno("shm_open " + name);
        }
        if (owner && ftruncate(fd, static_cast<off_t>(bytes)) != 0) {
            close(fd);
            shm_unlink(name.c_str());
            throw_errno("ftruncate " + name);
        }
        map_ = mmap(nullptr, bytes, PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
        close(fd);
        if (map_ == MAP_FAILED) {
            if (owner) shm_unlink(name.c_str());
            throw_errno("mmap " + name);
        }
    }

    ~ShmRegion() override {
        if (map_ != MAP_FAILED) munmap(map_, size_);
        if (owner_) shm_unlink(name_.c_str());
    }

    std::uint8_t* data() override { return static_cast<std::uint8_t*>(map_); }
    std::size_t size() const override { return size_; }

private:
    std::string name_;
    std::uint64_t size_;
    bool owner_;
    void* map_ = MAP_FAILED;
};

Message decode_or_throw(std::span<const std::uint8_t> frame) {
    auto result = decode(frame);
    if (auto* err = std::get_if<DecodeError>(&result))
        throw TransportError(std::string("bad frame: ") + to_string(*err));
    return std::get<Message>(std::move(result));
}

sockaddr_un make_addr(const std::string& path) {
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    if (path.size() >= sizeof(addr.sun_path))
        throw TransportError("endpoint path too long: " + path);
    std::strncpy(addr.sun_path, path.c_str(), sizeof(addr.sun_path) - 1);
    return addr;
}

void send_frame(int fd, std::span<const std::uint8_t> frame, const char* what) {
    if (frame.size() > ProtocolLimits::kMaxControlFrame)
        throw TransportError("control frame exceeds the frame limit");
    for (;;) {
        const ssize_t n = ::send(fd, frame.data(), frame.size(), MSG_NOSIGNAL);
        if (n == static_cast<ssize_t>(frame.size())) return;
        if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
            std::this_thread::sleep_for(std::chrono::microseconds(100));
            continue;  // peer's buffer full: block the sender
        }
        if (n < 0 && errno == EINTR) continue;
        throw_errno(std::string("send ") + what);
    }
}

class UdsDaemonTransport final : public DaemonTransport {
public:
    UdsDaemonTransport(const std::string& instance, std::uint32_t max_clients,
                       std::uint64_t region_bytes)
        : instance_(instance), path_(IpcNames::endpoint(instance)) {
        listen_fd_ = socket(AF_UNIX, SOCK_SEQPACKET, 0);
        if (listen_fd_ < 0) throw_errno("socket");
        const sockaddr_un addr = make_addr(path_);
        if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr),
                   sizeof(addr)) != 0) {
            const int err = errno;
            close(listen_fd_);
            if (err == EADDRINUSE)
                throw TransportError("endpoint already exists: " + path_);
            errno = err;
            throw_errno("bind " + path_);
        }
        if (listen(listen_fd_, 64) != 0) {
            close(listen_fd_);
            unlink(path_.c_str());
            throw_errno("listen " + path_);
        }
        set_nonblocking(listen_fd_);

        try {
            for (std::uint32_t slot = 1; slot <= max_clients; ++slot)
                regions_.push_back(std::make_unique<ShmRegion>(
                    IpcNames::region(instance, slot), region_bytes, true));
        } catch (...) {
            close(listen_fd_);
            unlink(path_.c_str());
            throw;
        }
    }

    ~UdsDaemonTransport() override {
        for (auto& [id, fd] : conns_) close(fd);
        close(listen_fd_);
        unlink(path_.c_str());
    }

    std::optional<Inbound> recv(std::chrono::microseconds timeout) override {
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        for (;;) {
            if (!ready_.empty()) return pop_ready();
            const auto now = std::chrono::steady_clock::now();
            if (now >= deadline) return std::nullopt;
            const auto remaining =
                std::chrono::duration_cast<std::chrono::microseconds>(deadline -
                                                                      now);

            std::vector<pollfd> fds;
            fds.push_back({listen_fd_, POLLIN, 0});
            std::vector<std::uint64_t> ids;
            for (const auto& [id, fd] : conns_) {
                fds.push_back({fd, POLLIN, 0});
                ids.push_back(id);
            }
            const timespec ts{
                static_cast<time_t>(remaining.count() / 1'000'000),
                static_cast<long>((remaining.count() % 1'000'000) * 1000)};
            const int rc = ppoll(fds.data(), fds.size(), &ts, nullptr);
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw_errno("ppoll");
            }
            if (rc == 0) return std::nullopt;

            if (fds[0].revents & POLLIN) accept_new();
            for (std::size_t i = 1; i < fds.size(); ++i)
                if (fds[i].revents & (POLLIN | POLLHUP | POLLERR))
                    drain_conn(ids[i - 1], fds[i].fd);
            // a frame may have arrived with a fresh connection: loop so the
            // new fd gets polled before the deadline passes
        }
    }

    void reply_origin(const std::string& origin, const Message& m) override {
        send_to_conn(parse_conn(origin), m);
    }

    void bind(std::uint32_t client_id, const std::string& origin) override {
        bound_[client_id] = parse_conn(origin);
    }

    void send(std::uint32_t client_id, const Message& m) override {
        auto it = bound_.find(client_id);
        if (it == bound_.end()) return;  // client already gone
        send_to_conn(it->second, m);
    }

    DataRegion& region(std::uint32_t client_id) override {
        return *regions_.at(client_id - 1);
    }

    std::string region_name(std::uint32_t client_id) const override {
        return IpcNames::region(instance_, client_id);
    }

    std::uint32_t max_clients() const override {
        return static_cast<std::uint32_t>(regions_.size());
    }

private:
    static std::uint64_t parse_conn(const std::string& origin) {
        if (origin.rfind("conn:", 0) != 0)
            throw TransportError("bad origin: " + origin);
        return std::stoull(origin.substr(5));
    }

    Inbound pop_ready() {
        Inbound in = std::move(ready_.front());
        ready_.erase(ready_.begin());
        return in;
    }

    void accept_new() {
        for (;;) {
            const int fd = accept(listen_fd_, nullptr, nullptr);
            if (fd < 0) {
                if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR)
                    return;
                throw_errno("accept");
            }
            set_nonblocking(fd);
            conns_[next_conn_++] = fd;
        }
    }

    void drain_conn(std::uint64_t id, int fd) {
        std::uint8_t buf[ProtocolLimits::kMaxControlFrame];
        for (;;) {
            const ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
            if (n > 0) {
                ready_.push_back(
                    {decode_or_throw({buf, static_cast<std::size_t>(n)}),
                     "conn:" + std::to_string(id)});
                continue;
            }
            if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) return;
            if (n < 0 && errno == EINTR) continue;
            // peer closed or errored: drop the connection, routes go stale
            close(fd);
            conns_.erase(id);
            return;
        }
    }

    void send_to_conn(std::uint64_t conn_id, const Message& m) {
        auto it = conns_.find(conn_id);
        if (it == conns_.end()) return;
        try {
            send_frame(it->second, encode(m), "response");
        } catch (const TransportError&) {
            close(it->second);
            conns_.erase(it);
        }
    }

    std::string instance_;
    std::string path_;
    int listen_fd_ = -1;
    std::uint64_t next_conn_ = 1;
    std::map<std::uint64_t, int> conns_;
    std::map<std::uint32_t, std::uint64_t> bound_;
    std::vector<std::unique_ptr<ShmRegion>> regions_;
    std::vector<Inbound> ready_;
};

class UdsClientChannel final : public ClientChannel {
public:
    explicit UdsClientChannel(const std::string& instance) {
        const std::string path = IpcNames::endpoint(instance);
        fd_ = socket(AF_UNIX, SOCK_SEQPACKET, 0);
        if (fd_ < 0) throw_errno("socket");
        const sockaddr_un addr = make_addr(path);
        if (connect(fd_, reinterpret_cast<const sockaddr*>(&addr),
                    sizeof(addr)) != 0) {
            const int err = errno;
            close(fd_);
            if (err == ENOENT || err == ECONNREFUSED)
                throw TransportError("endpoint missing: " + path);
            errno = err;
            throw_errno("connect " + path);
        }
    }

    ~UdsClientChannel() override {
        if (fd_ >= 0) close(fd_);
    }

    void send(const Message& m) override {
        send_frame(fd_, encode(m), "request");
    }

    std::optional<Message> recv(std::chrono::microseconds timeout) override {
        if (!wait_readable(fd_, timeout)) return std::nullopt;
        std::uint8_t buf[ProtocolLimits::kMaxControlFrame];
        for (;;) {
            const ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
            if (n > 0)
                return decode_or_throw({buf, static_cast<std::size_t>(n)});
            if (n == 0) throw TransportError("daemon closed the connection");
            if (errno == EINTR) continue;
            throw_errno("recv response");
        }
    }

    void attach_lease(const LeaseInfo& lease) override {
        region_ =
            std::make_unique<ShmRegion>(lease.shm_name, lease.shm_bytes, false);
    }

    DataRegion& region() override {
        if (!region_) throw TransportError("no lease attached");
        return *region_;
    }

private:
    int fd_ = -1;
    std::unique_ptr<ShmRegion> region_;
};

} // namespace

std::unique_ptr<DaemonTransport> open_os_daemon_transport(
    const std::string& instance, std::uint32_t max_clients,
    std::uint64_t region_bytes) {
    return std::make_unique<UdsDaemonTransport>(instance, max_clients,
                                                region_bytes);
}

std::unique_ptr<ClientChannel> open_os_client_channel(
    const std::string& instance) {
    return std::make_unique<UdsClientChannel>(instance);
}

void unlink_os_instance(const std::string& instance,
                        std::uint32_t max_clients) {
    unlink(IpcNames::endpoint(instance).c_str());
    for (std::uint32_t slot = 1; slot <= max_clients; ++slot)
        shm_unlink(IpcNames::region(instance, slot).c_str());
}

} // namespace vgpu
