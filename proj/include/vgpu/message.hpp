#ifndef VGPU_MESSAGE_HPP
#define VGPU_MESSAGE_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "vgpu/types.hpp"

namespace vgpu {

// Wire frame, little-endian throughout:
//
//   offset  size  field
//        0     4  magic "VGPU"
//        4     1  version (1)
//        5     1  opcode
//        6     4  client_id
//       10     8  task_id
//       18     8  payload_len
//       26     -  payload
inline constexpr std::array<std::uint8_t, 4> kMagic{'V', 'G', 'P', 'U'};
inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::size_t kHeaderSize = 26;

enum class Opcode : std::uint8_t {
    Req = 0x01,   // lease a virtual GPU
    Snd = 0x02,   // input data is in the client's region; payload = u64 length
    Str = 0x03,   // start a kernel; payload = kernel descriptor
    Stp = 0x04,   // poll for completion
    Rcv = 0x05,   // fetch result into the region; ACK payload = u64 length
    Rls = 0x06,   // release the lease
    Ack = 0x10,
    Nack = 0x11,
};

enum class ErrCode : std::uint16_t {
    Phase = 1,      // verb illegal in the session's current phase
    NoLease = 2,    // unknown or unleased client id
    Size = 3,       // data exceeds the leased region
    Pending = 4,    // task not done yet (STP poll)
    Payload = 5,    // unknown payload id or payload rejected the input
    Full = 6,       // all client slots leased
    Malformed = 7,  // request payload did not parse
    Internal = 8,
};

struct Message {
    Opcode opcode = Opcode::Req;
    std::uint32_t client_id = 0;
    std::uint64_t task_id = 0;
    std::vector<std::uint8_t> payload;

    bool operator==(const Message&) const = default;
};

std::vector<std::uint8_t> encode(const Message& m);

enum class DecodeError { BadMagic, BadVersion, BadOpcode, Truncated };
const char* to_string(DecodeError e);

using DecodeResult = std::variant<Message, DecodeError>;
DecodeResult decode(std::span<const std::uint8_t> frame);

// ---- structured payloads -------------------------------------------------

// ACK(REQ) payload: the granted lease.
struct LeaseInfo {
    std::uint32_t client_id = 0;
    std::uint64_t shm_bytes = 0;
    std::uint32_t stream_hint = 0;
    std::string shm_name;
    std::string response_queue;  // empty when the transport routes implicitly

    bool operator==(const LeaseInfo&) const = default;
};

// STR payload: what to run and how long its stages take.
struct KernelDescriptor {
    std::string payload_id = "identity";
    Micros t_data_in = 0;
    Micros t_comp = 0;
    Micros t_data_out = 0;
    std::uint32_t grid_size = 1;
    std::uint64_t output_bytes = 0;

    bool operator==(const KernelDescriptor&) const = default;
};

std::vector<std::uint8_t> encode_lease(const LeaseInfo& lease);
std::optional<LeaseInfo> parse_lease(std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> encode_descriptor(const KernelDescriptor& d);
std::optional<KernelDescriptor> parse_descriptor(
    std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> encode_u64(std::uint64_t value);
std::optional<std::uint64_t> parse_u64(std::span<const std::uint8_t> payload);

// NACK payload: u16 error code + UTF-8 detail.
std::vector<std::uint8_t> encode_nack(ErrCode code, std::string_view detail);
struct NackInfo {
    ErrCode code;
    std::string detail;
};
std::optional<NackInfo> parse_nack(std::span<const std::uint8_t> payload);

} // namespace vgpu

#endif
