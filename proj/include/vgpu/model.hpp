#ifndef VGPU_MODEL_HPP
#define VGPU_MODEL_HPP

#include "vgpu/types.hpp"

namespace vgpu {

// =========================================================================
// Closed-form execution-time model for N identical kernels sharing one
// device (A = t_data_in, B = t_comp, C = t_data_out):
//
//   no virtualization:   N(T_init + A + B + C) + (N-1) T_ctx_switch
//   PS-1 (any class):    N(A + C) + B
//   PS-2, C-I:           A + N B + C
//   PS-2, IO-I:          N max(A, C) + B + min(A, C)
//
// The two PS-2 forms are instances of the general PS-2 makespan
//   A + B + C + (N-1) max(A, B, C),
// which the hardware-queue rules force: the retrieve of stream i blocks
// the compute of stream i+1, so exactly one stage stays serial while the
// other two hide behind it.
// =========================================================================

// ComputeIntensive iff both transfers take no longer than the compute
// (inclusive); IOIntensive iff both strictly exceed it; everything else
// is Intermediate.
KernelClass classify_kernel(const KernelProfile& p);

// PS-1 for compute-intensive kernels, PS-2 for I/O-intensive ones.
// Intermediate kernels default to PS-1; callers that want the profile-
// specific winner can use compare_styles() instead.
ProgrammingStyle recommend_style(KernelClass c);

Micros t_total_no_vt(const ModelParams& m);
Micros t_total_ci_ps1(const ModelParams& m);
Micros t_total_ci_ps2(const ModelParams& m);
Micros t_total_ioi_ps1(const ModelParams& m);
Micros t_total_ioi_ps2(const ModelParams& m);

// Class-independent forms, valid for any profile in the idealized regime.
Micros t_total_ps1(const ModelParams& m);
Micros t_total_ps2(const ModelParams& m);

struct StyleComparison {
    Micros ps1_total;
    Micros ps2_total;
    ProgrammingStyle preferred;  // smaller total; ties go to PS1
};
StyleComparison compare_styles(const ModelParams& m);

double speedup_ci(const ModelParams& m);
double speedup_ioi(const ModelParams& m);

// N -> infinity limits of the two speedups.
double speedup_limit_ci(const ModelParams& m);
double speedup_limit_ioi(const ModelParams& m);

} // namespace vgpu

#endif
