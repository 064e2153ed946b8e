#ifndef VGPU_PAYLOAD_HPP
#define VGPU_PAYLOAD_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vgpu {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;
using PayloadFn = std::function<Bytes(ByteView)>;

struct PayloadError : std::runtime_error {
    enum class Kind { UnknownId, DuplicateId, MalformedInput };
    PayloadError(Kind k, const std::string& what)
        : std::runtime_error(what), kind(k) {}
    Kind kind;
};

// Registry of pure bytes->bytes functions standing in for GPU kernels.
// The per-process "different data" of an SPMD run flows through these, so
// results must not depend on scheduling, style, or device shape.
//
// Built-ins:
//   identity      input returned unchanged
//   vector-add    two packed float32 arrays, concatenated -> elementwise sum
//   vector-scale  packed float32 array -> each element times 2
class PayloadRegistry {
public:
    void register_payload(std::string id, PayloadFn fn);
    bool contains(std::string_view id) const;
    Bytes execute(std::string_view id, ByteView input) const;

    // Shared immutable registry holding only the built-ins.
    static const PayloadRegistry& builtins();
    static PayloadRegistry with_builtins();

private:
    std::map<std::string, PayloadFn, std::less<>> fns_;
};

PayloadFn make_vector_scale(float factor);

} // namespace vgpu

#endif
