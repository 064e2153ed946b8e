#include "vgpu/message.hpp"

#include <cstring>

namespace vgpu {

namespace {

void put_u16(std::uint8_t* p, std::uint16_t v) {
    p[0] = static_cast<std::uint8_t>(v);
    p[1] = static_cast<std::uint8_t>(v >> 8);
}

void put_u32(std::uint8_t* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

void put_u64(std::uint8_t* p, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

bool valid_opcode(std::uint8_t op) {
    switch (static_cast<Opcode>(op)) {
        case Opcode::Req:
        case Opcode::Snd:
        case Opcode::Str:
        case Opcode::Stp:
        case Opcode::Rcv:
        case Opcode::Rls:
        case Opcode::Ack:
        case Opcode::Nack:
            return true;
    }
    return false;
}

// length-prefixed byte strings for the structured payloads
class Writer {
public:
    void u16(std::uint16_t v) { grow(2, [&](std::uint8_t* p) { put_u16(p, v); }); }
    void u32(std::uint32_t v) { grow(4, [&](std::uint8_t* p) { put_u32(p, v); }); }
    void u64(std::uint64_t v) { grow(8, [&](std::uint8_t* p) { put_u64(p, v); }); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    template <class F>
    void grow(std::size_t n, F fill) {
        buf_.resize(buf_.size() + n);
        fill(buf_.data() + buf_.size() - n);
    }
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}
    bool u16(std::uint16_t* v) { return fixed(2, [&](const std::uint8_t* p) { *v = get_u16(p); }); }
    bool u32(std::uint32_t* v) { return fixed(4, [&](const std::uint8_t* p) { *v = get_u32(p); }); }
    bool u64(std::uint64_t* v) { return fixed(8, [&](const std::uint8_t* p) { *v = get_u64(p); }); }
    bool str(std::string* s) {
        std::uint32_t len = 0;
        if (!u32(&len) || data_.size() - pos_ < len) return false;
        s->assign(reinterpret_cast<const char*>(data_.data() + pos_), len);
        pos_ += len;
        return true;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    template <class F>
    bool fixed(std::size_t n, F read) {
        if (data_.size() - pos_ < n) return false;
        read(data_.data() + pos_);
        pos_ += n;
        return true;
    }
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

} // namespace

const char* to_string(DecodeError e) {
    switch (e) {
        case DecodeError::BadMagic: return "bad magic";
        case DecodeError::BadVersion: return "bad version";
        case DecodeError::BadOpcode: return "bad opcode";
        case DecodeError::Truncated: return "truncated frame";
    }
    return "?";
}

std::vector<std::uint8_t> encode(const Message& m) {
    std::vector<std::uint8_t> out(kHeaderSize + m.payload.size());
    std::memcpy(out.data(), kMagic.data(), 4);
    out[4] = kProtocolVersion;
    out[5] = static_cast<std::uint8_t>(m.opcode);
    put_u32(&out[6], m.client_id);
    put_u64(&out[10], m.task_id);
    put_u64(&out[18], m.payload.size());
    std::memcpy(out.data() + kHeaderSize, m.payload.data(), m.payload.size());
    return out;
}

DecodeResult decode(std::span<const std::uint8_t> frame) {
    if (frame.size() < kHeaderSize) return DecodeError::Truncated;
    if (std::memcmp(frame.data(), kMagic.data(), 4) != 0)
        return DecodeError::BadMagic;
    if (frame[4] != kProtocolVersion) return DecodeError::BadVersion;
    if (!valid_opcode(frame[5])) return DecodeError::BadOpcode;
    const std::uint64_t len = get_u64(&frame[18]);
    if (frame.size() - kHeaderSize != len) return DecodeError::Truncated;

    Message m;
    m.opcode = static_cast<Opcode>(frame[5]);
    m.client_id = get_u32(&frame[6]);
    m.task_id = get_u64(&frame[10]);
    m.payload.assign(frame.begin() + kHeaderSize, frame.end());
    return m;
}

std::vector<std::uint8_t> encode_lease(const LeaseInfo& lease) {
    Writer w;
    w.u32(lease.client_id);
    w.u64(lease.shm_bytes);
    w.u32(lease.stream_hint);
    w.str(lease.shm_name);
    w.str(lease.response_queue);
    return w.take();
}

std::optional<LeaseInfo> parse_lease(std::span<const std::uint8_t> payload) {
    Reader r(payload);
    LeaseInfo l;
    if (r.u32(&l.client_id) && r.u64(&l.shm_bytes) && r.u32(&l.stream_hint) &&
        r.str(&l.shm_name) && r.str(&l.response_queue) && r.done())
        return l;
    return std::nullopt;
}

std::vector<std::uint8_t> encode_descriptor(const KernelDescriptor& d) {
    Writer w;
    w.str(d.payload_id);
    w.u64(d.t_data_in);
    w.u64(d.t_comp);
    w.u64(d.t_data_out);
    w.u32(d.grid_size);
    w.u64(d.output_bytes);
    return w.take();
}

std::optional<KernelDescriptor> parse_descriptor(
    std::span<const std::uint8_t> payload) {
    Reader r(payload);
    KernelDescriptor d;
    if (r.str(&d.payload_id) && r.u64(&d.t_data_in) && r.u64(&d.t_comp) &&
        r.u64(&d.t_data_out) && r.u32(&d.grid_size) && r.u64(&d.output_bytes) &&
        r.done())
        return d;
    return std::nullopt;
}

std::vector<std::uint8_t> encode_u64(std::uint64_t value) {
    std::vector<std::uint8_t> out(8);
    put_u64(out.data(), value);
    return out;
}

std::optional<std::uint64_t> parse_u64(std::span<const std::uint8_t> payload) {
    if (payload.size() != 8) return std::nullopt;
    return get_u64(payload.data());
}

std::vector<std::uint8_t> encode_nack(ErrCode code, std::string_view detail) {
    Writer w;
    w.u16(static_cast<std::uint16_t>(code));
    w.str(detail);
    return w.take();
}

std::optional<NackInfo> parse_nack(std::span<const std::uint8_t> payload) {
    Reader r(payload);
    std::uint16_t code = 0;
    std::string detail;
    if (r.u16(&code) && r.str(&detail) && r.done())
        return NackInfo{static_cast<ErrCode>(code), std::move(detail)};
    return std::nullopt;
}

} // namespace vgpu
