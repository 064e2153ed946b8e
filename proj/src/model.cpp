#include "vgpu/model.hpp"

#include <algorithm>
#include <stdexcept>

namespace vgpu {

const char* to_string(KernelClass c) {
    switch (c) {
        case KernelClass::ComputeIntensive: return "compute-intensive";
        case KernelClass::IOIntensive: return "io-intensive";
        case KernelClass::Intermediate: return "intermediate";
    }
    return "?";
}

const char* to_string(ProgrammingStyle s) {
    return s == ProgrammingStyle::PS1 ? "PS1" : "PS2";
}

namespace {

void check(const ModelParams& m) {
    if (m.n_process < 1)
        throw std::invalid_argument("model: n_process must be >= 1");
}

} // namespace

KernelClass classify_kernel(const KernelProfile& p) {
    const bool in_le = p.t_data_in <= p.t_comp;
    const bool out_le = p.t_data_out <= p.t_comp;
    if (in_le && out_le) return KernelClass::ComputeIntensive;
    if (!in_le && !out_le) return KernelClass::IOIntensive;
    return KernelClass::Intermediate;
}

ProgrammingStyle recommend_style(KernelClass c) {
    return c == KernelClass::IOIntensive ? ProgrammingStyle::PS2
                                         : ProgrammingStyle::PS1;
}

Micros t_total_no_vt(const ModelParams& m) {
    check(m);
    const auto& p = m.profile;
    const Micros cycle = m.t_init + p.t_data_in + p.t_comp + p.t_data_out;
    return Micros{m.n_process} * cycle + Micros{m.n_process - 1} * m.t_ctx_switch;
}

Micros t_total_ps1(const ModelParams& m) {
    check(m);
    const auto& p = m.profile;
    return Micros{m.n_process} * (p.t_data_in + p.t_data_out) + p.t_comp;
}

Micros t_total_ps2(const ModelParams& m) {
    check(m);
    const auto& p = m.profile;
    const Micros widest = std::max({p.t_data_in, p.t_comp, p.t_data_out});
    return p.t_data_in + p.t_comp + p.t_data_out + Micros{m.n_process - 1} * widest;
}

Micros t_total_ci_ps1(const ModelParams& m) { return t_total_ps1(m); }

Micros t_total_ci_ps2(const ModelParams& m) {
    check(m);
    const auto& p = m.profile;
    return p.t_data_in + Micros{m.n_process} * p.t_comp + p.t_data_out;
}

Micros t_total_ioi_ps1(const ModelParams& m) { return t_total_ps1(m); }

Micros t_total_ioi_ps2(const ModelParams& m) {
    check(m);
    const auto& p = m.profile;
    return Micros{m.n_process} * std::max(p.t_data_in, p.t_data_out) + p.t_comp +
           std::min(p.t_data_in, p.t_data_out);
}

StyleComparison compare_styles(const ModelParams& m) {
    const Micros ps1 = t_total_ps1(m);
    const Micros ps2 = t_total_ps2(m);
    return {ps1, ps2,
            ps1 <= ps2 ? ProgrammingStyle::PS1 : ProgrammingStyle::PS2};
}

double speedup_ci(const ModelParams& m) {
    return static_cast<double>(t_total_no_vt(m)) /
           static_cast<double>(t_total_ci_ps1(m));
}

double speedup_ioi(const ModelParams& m) {
    return static_cast<double>(t_total_no_vt(m)) /
           static_cast<double>(t_total_ioi_ps2(m));
}

double speedup_limit_ci(const ModelParams& m) {
    const auto& p = m.profile;
    const double num = static_cast<double>(m.t_init + p.t_data_in + p.t_comp +
                                           p.t_data_out + m.t_ctx_switch);
    return num / static_cast<double>(p.t_data_in + p.t_data_out);
}

double speedup_limit_ioi(const ModelParams& m) {
    const auto& p = m.profile;
    const double num = static_cast<double>(m.t_init + p.t_data_in + p.t_comp +
                                           p.t_data_out + m.t_ctx_switch);
    return num / static_cast<double>(std::max(p.t_data_in, p.t_data_out));
}

} // namespace vgpu
