#include "vgpu/payload.hpp"

#include <cstring>

#include "vgpu/payload_kernels.hpp"

namespace vgpu {

namespace {

Bytes identity(ByteView input) { return Bytes(input.begin(), input.end()); }

// Byte buffers come from operator new, which aligns to max_align_t; the
// kernels read and write float views in place rather than unpacking, so a
// 64 MiB task does not burn four extra buffer copies.
const float* float_view(ByteView b, std::size_t offset) {
    return reinterpret_cast<const float*>(b.data() + offset);
}

// Input: a then b, each n float32, little-endian packed. Output: a + b.
Bytes vector_add(ByteView input) {
    if (input.size() % (2 * sizeof(float)) != 0)
        throw PayloadError(PayloadError::Kind::MalformedInput,
                           "vector-add: input must hold two equal float32 arrays");
    const std::size_t n = input.size() / (2 * sizeof(float));
    Bytes result(n * sizeof(float));
    kernels::vector_add(reinterpret_cast<float*>(result.data()),
                        float_view(input, 0),
                        float_view(input, n * sizeof(float)), n);
    return result;
}

} // namespace

PayloadFn make_vector_scale(float factor) {
    return [factor](ByteView input) {
        if (input.size() % sizeof(float) != 0)
            throw PayloadError(PayloadError::Kind::MalformedInput,
                               "vector-scale: input must be packed float32");
        const std::size_t n = input.size() / sizeof(float);
        Bytes result(input.size());
        kernels::vector_scale(reinterpret_cast<float*>(result.data()),
                              float_view(input, 0), factor, n);
        return result;
    };
}

void PayloadRegistry::register_payload(std::string id, PayloadFn fn) {
    auto [it, inserted] = fns_.emplace(std::move(id), std::move(fn));
    if (!inserted)
        throw PayloadError(PayloadError::Kind::DuplicateId,
                           "payload id already registered: " + it->first);
}

bool PayloadRegistry::contains(std::string_view id) const {
    return fns_.find(id) != fns_.end();
}

Bytes PayloadRegistry::execute(std::string_view id, ByteView input) const {
    auto it = fns_.find(id);
    if (it == fns_.end())
        throw PayloadError(PayloadError::Kind::UnknownId,
                           "unknown payload id: " + std::string(id));
    return it->second(input);
}

PayloadRegistry PayloadRegistry::with_builtins() {
    PayloadRegistry r;
    r.register_payload("identity", identity);
    r.register_payload("vector-add", vector_add);
    r.register_payload("vector-scale", make_vector_scale(2.0f));
    return r;
}

const PayloadRegistry& PayloadRegistry::builtins() {
    static const PayloadRegistry r = with_builtins();
    return r;
}

} // namespace vgpu
