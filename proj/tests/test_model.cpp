#include "doctest.h"
#include "oracle.hpp"
#include "vgpu/model.hpp"

using namespace vgpu;
using oracle::kCI;
using oracle::kIOI;

TEST_CASE("kernel classification") {
    CHECK(classify_kernel(oracle::profile({20, 50, 20})) ==
          KernelClass::ComputeIntensive);  // EP-shaped
    CHECK(classify_kernel(oracle::profile({60, 20, 40})) ==
          KernelClass::IOIntensive);  // VecAdd-shaped
    // boundary is inclusive for compute-intensive
    CHECK(classify_kernel(oracle::profile({50, 50, 50})) ==
          KernelClass::ComputeIntensive);
    // mixed case matches neither definition
    CHECK(classify_kernel(oracle::profile({60, 50, 10})) ==
          KernelClass::Intermediate);
    CHECK(classify_kernel(oracle::profile({10, 50, 60})) ==
          KernelClass::Intermediate);
}

TEST_CASE("classification is total") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 2000; ++i) {
        const auto t = oracle::random_triple(rng, 0, 100);
        const KernelClass c = classify_kernel(oracle::profile(t));
        const bool ci = t.in <= t.comp && t.out <= t.comp;
        const bool ioi = t.in > t.comp && t.out > t.comp;
        if (ci) CHECK(c == KernelClass::ComputeIntensive);
        else if (ioi) CHECK(c == KernelClass::IOIntensive);
        else CHECK(c == KernelClass::Intermediate);
    }
}

TEST_CASE("style recommendation") {
    CHECK(recommend_style(KernelClass::ComputeIntensive) ==
          ProgrammingStyle::PS1);
    CHECK(recommend_style(KernelClass::IOIntensive) == ProgrammingStyle::PS2);
    CHECK(recommend_style(KernelClass::Intermediate) == ProgrammingStyle::PS1);
}

TEST_CASE("compare_styles exposes the per-profile winner") {
    // at N=1 every form collapses to in+comp+out and the tie goes to PS1
    const auto tie = compare_styles(oracle::params(1, {60, 50, 10}, 0, 0));
    CHECK(tie.ps1_total == tie.ps2_total);
    CHECK(tie.preferred == ProgrammingStyle::PS1);

    // for an intermediate profile with one dominant transfer, PS2's single
    // serial stage beats PS1's two serial transfer stages once N > 1
    const auto mm = compare_styles(oracle::params(4, {60, 50, 10}, 0, 0));
    CHECK(mm.ps1_total == oracle::ps1(4, {60, 50, 10}));
    CHECK(mm.ps2_total == oracle::ps2(4, {60, 50, 10}));
    CHECK(mm.preferred == ProgrammingStyle::PS2);

    // compute-dominated profiles prefer PS1 whenever in+out <= comp
    const auto ep = compare_styles(oracle::params(4, kCI, 0, 0));
    CHECK(ep.preferred == ProgrammingStyle::PS1);
}

TEST_CASE("total time without virtualization") {
    CHECK(t_total_no_vt(oracle::params(1, kCI)) == 190);
    CHECK(t_total_no_vt(oracle::params(4, kCI)) ==
          oracle::no_vt(4, 100, 10, kCI));
    CHECK(t_total_no_vt(oracle::params(4, kCI)) == 790);
    CHECK(t_total_no_vt(oracle::params(8, kCI)) == 1590);
}

TEST_CASE("compute-intensive totals") {
    CHECK(t_total_ci_ps1(oracle::params(1, kCI)) == 90);
    CHECK(t_total_ci_ps1(oracle::params(4, kCI)) == oracle::ps1(4, kCI));
    CHECK(t_total_ci_ps1(oracle::params(4, kCI)) == 210);
    CHECK(t_total_ci_ps1(oracle::params(8, kCI)) == 370);

    CHECK(t_total_ci_ps2(oracle::params(1, kCI)) == 90);
    CHECK(t_total_ci_ps2(oracle::params(4, kCI)) == oracle::ci_ps2(4, kCI));
    CHECK(t_total_ci_ps2(oracle::params(4, kCI)) == 240);
    CHECK(t_total_ci_ps2(oracle::params(8, kCI)) == 440);
}

TEST_CASE("io-intensive totals") {
    CHECK(t_total_ioi_ps1(oracle::params(1, kIOI)) == 120);
    CHECK(t_total_ioi_ps1(oracle::params(4, kIOI)) == oracle::ps1(4, kIOI));
    CHECK(t_total_ioi_ps1(oracle::params(4, kIOI)) == 420);
    CHECK(t_total_ioi_ps1(oracle::params(8, kIOI)) == 820);

    CHECK(t_total_ioi_ps2(oracle::params(4, kIOI)) == oracle::ioi_ps2(4, kIOI));
    CHECK(t_total_ioi_ps2(oracle::params(4, kIOI)) == 300);
    // the branch with the larger outbound transfer
    CHECK(t_total_ioi_ps2(oracle::params(4, {40, 20, 60})) == 300);
    // one stream has no overlap partner
    CHECK(t_total_ioi_ps2(oracle::params(1, kIOI)) == 120);
}

TEST_CASE("io-intensive PS2 matches its branch forms") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 1000; ++i) {
        const auto t = oracle::random_triple(rng);
        for (std::uint32_t n : {1u, 2u, 5u, 16u}) {
            const auto m = oracle::params(n, t, 0, 0);
            if (t.out < t.in)
                CHECK(t_total_ioi_ps2(m) == n * t.in + t.comp + t.out);
            else
                CHECK(t_total_ioi_ps2(m) == t.in + t.comp + n * t.out);
        }
    }
}

TEST_CASE("speedups against the canonical profiles") {
    CHECK(speedup_ci(oracle::params(4, kCI)) ==
          doctest::Approx(790.0 / 210.0).epsilon(1e-9));
    CHECK(speedup_ci(oracle::params(1, kCI)) ==
          doctest::Approx(190.0 / 90.0).epsilon(1e-9));
    CHECK(speedup_ci(oracle::params(1, kCI, 0, 0)) == doctest::Approx(1.0));

    CHECK(speedup_ioi(oracle::params(4, kIOI)) ==
          doctest::Approx(910.0 / 300.0).epsilon(1e-9));
    CHECK(speedup_ioi(oracle::params(1, kIOI)) ==
          doctest::Approx(220.0 / 120.0).epsilon(1e-9));
    CHECK(speedup_ioi(oracle::params(1, kIOI, 0, 0)) == doctest::Approx(1.0));
}

TEST_CASE("speedup limits") {
    CHECK(speedup_limit_ci(oracle::params(4, kCI)) ==
          doctest::Approx(5.0).epsilon(1e-9));
    CHECK(speedup_limit_ioi(oracle::params(4, kIOI)) ==
          doctest::Approx(230.0 / 60.0).epsilon(1e-9));
    // nothing left to hide
    CHECK(speedup_limit_ci(oracle::params(1, {20, 0, 20}, 0, 0)) ==
          doctest::Approx(1.0));
}

TEST_CASE("speedup is nondecreasing in N and converges to its limit") {
    for (const auto t : {kCI, kIOI}) {
        const bool ci = t.comp >= t.in && t.comp >= t.out;
        double prev = 0.0;
        for (std::uint32_t n = 1; n <= 64; ++n) {
            const auto m = oracle::params(n, t);
            const double s = ci ? speedup_ci(m) : speedup_ioi(m);
            CHECK(s >= prev - 1e-12);
            prev = s;
        }
        const auto m1 = oracle::params(1, t);
        const double limit =
            ci ? speedup_limit_ci(m1) : speedup_limit_ioi(m1);
        // within 5% once N >= 100 (t_init + t_ctx) / (t_in + t_out)
        const std::uint32_t n_big = static_cast<std::uint32_t>(
            100 * (oracle::kTInit + oracle::kTCtx) / (t.in + t.out) + 1);
        const auto mb = oracle::params(n_big, t);
        const double s = ci ? speedup_ci(mb) : speedup_ioi(mb);
        CHECK(std::abs(s / limit - 1.0) < 0.05);
    }
}

TEST_CASE("totals are strictly monotonic") {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 500; ++i) {
        const auto t = oracle::random_triple(rng, 1, 10000);
        const std::uint32_t n = 2 + static_cast<std::uint32_t>(rng() % 15);
        const auto m = oracle::params(n, t, 500, 50);

        auto bump = [&](int field) {
            auto m2 = m;
            switch (field) {
                case 0: m2.profile.t_data_in += 1; break;
                case 1: m2.profile.t_comp += 1; break;
                case 2: m2.profile.t_data_out += 1; break;
                case 3: m2.t_init += 1; break;
                case 4: m2.t_ctx_switch += 1; break;
                default: m2.n_process += 1; break;
            }
            return m2;
        };

        // every parameter moves the native total (t_ctx needs n >= 2)
        for (int f = 0; f < 6; ++f) {
            const auto m2 = bump(f);
            CHECK(t_total_no_vt(m2) > t_total_no_vt(m));
        }
        // profile durations and N move every virtualized total
        for (int f : {0, 1, 2, 5}) {
            const auto m2 = bump(f);
            CHECK(t_total_ci_ps1(m2) > t_total_ci_ps1(m));
            CHECK(t_total_ci_ps2(m2) > t_total_ci_ps2(m));
            CHECK(t_total_ioi_ps1(m2) > t_total_ioi_ps1(m));
            CHECK(t_total_ioi_ps2(m2) > t_total_ioi_ps2(m));
        }
    }
}

TEST_CASE("style dominance holds on the regions the closed forms give") {
    std::mt19937_64 rng(17);
    int ci_seen = 0, ioi_seen = 0;
    for (int i = 0; i < 5000 && (ci_seen < 500 || ioi_seen < 500); ++i) {
        const auto t = oracle::random_triple(rng);
        const auto cls = classify_kernel(oracle::profile(t));
        for (std::uint32_t n : {1u, 2u, 8u, 16u}) {
            const auto m = oracle::params(n, t, 0, 0);
            if (cls == KernelClass::IOIntensive) {
                // PS2 never loses for io-intensive kernels
                CHECK(t_total_ioi_ps2(m) <= t_total_ioi_ps1(m));
                ++ioi_seen;
            } else if (cls == KernelClass::ComputeIntensive &&
                       t.in + t.out <= t.comp) {
                // PS1 wins for compute-intensive kernels whose combined
                // transfers fit inside the compute window; outside that
                // region Eq-3 undercuts Eq-2 (see the acceptance notes)
                CHECK(t_total_ci_ps1(m) <= t_total_ci_ps2(m));
                ++ci_seen;
            }
        }
    }
    CHECK(ci_seen >= 500);
    CHECK(ioi_seen >= 500);
}

TEST_CASE("model rejects zero processes") {
    auto m = oracle::params(1, kCI);
    m.n_process = 0;
    CHECK_THROWS_AS((void)t_total_no_vt(m), std::invalid_argument);
}
