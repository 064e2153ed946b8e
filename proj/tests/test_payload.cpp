#include <cstring>
#include <random>

#include "doctest.h"
#include "vgpu/payload.hpp"
#include "vgpu/payload_kernels.hpp"

using namespace vgpu;

namespace {

Bytes pack_floats(const std::vector<float>& v) {
    Bytes b(v.size() * sizeof(float));
    std::memcpy(b.data(), v.data(), b.size());
    return b;
}

std::vector<float> unpack_floats(ByteView b) {
    std::vector<float> v(b.size() / sizeof(float));
    std::memcpy(v.data(), b.data(), b.size());
    return v;
}

} // namespace

TEST_CASE("builtin payloads") {
    const auto& reg = PayloadRegistry::builtins();

    const Bytes data{1, 2, 3, 4, 5};
    CHECK(reg.execute("identity", data) == data);

    // elementwise definition
    const Bytes sum = reg.execute("vector-add", pack_floats({1.f, 2.f, 3.f, 4.f}));
    CHECK(unpack_floats(sum) == std::vector<float>{4.f, 6.f});

    const Bytes scaled = reg.execute("vector-scale", pack_floats({1.5f}));
    CHECK(unpack_floats(scaled) == std::vector<float>{3.0f});
}

TEST_CASE("registry rejects duplicates and unknown ids") {
    auto reg = PayloadRegistry::with_builtins();
    CHECK_THROWS_AS(reg.register_payload("identity", [](ByteView b) {
        return Bytes(b.begin(), b.end());
    }),
                    PayloadError);
    CHECK_THROWS_AS((void)reg.execute("no-such-payload", {}), PayloadError);
    CHECK(!reg.contains("no-such-payload"));
    CHECK(reg.contains("vector-add"));

    reg.register_payload("reverse", [](ByteView b) {
        return Bytes(b.rbegin(), b.rend());
    });
    CHECK(reg.execute("reverse", Bytes{1, 2, 3}) == Bytes{3, 2, 1});
}

TEST_CASE("malformed input lengths are rejected") {
    const auto& reg = PayloadRegistry::builtins();
    CHECK_THROWS_AS((void)reg.execute("vector-add", Bytes{1, 2, 3}), PayloadError);
    CHECK_THROWS_AS((void)reg.execute("vector-scale", Bytes{1, 2, 3}),
                    PayloadError);
}

TEST_CASE("parallel kernels match the serial reference") {
    std::mt19937 rng(41);
    std::uniform_real_distribution<float> d(-1000.f, 1000.f);
    for (std::size_t n : {1u, 7u, 1024u, 100003u}) {
        std::vector<float> a(n), b(n), par(n), ser(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = d(rng);
            b[i] = d(rng);
        }
        kernels::vector_add(par.data(), a.data(), b.data(), n);
        kernels::vector_add_serial(ser.data(), a.data(), b.data(), n);
        CHECK(par == ser);

        kernels::vector_scale(par.data(), a.data(), 3.25f, n);
        kernels::vector_scale_serial(ser.data(), a.data(), 3.25f, n);
        CHECK(par == ser);
    }
}
