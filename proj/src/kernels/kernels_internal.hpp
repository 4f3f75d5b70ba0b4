#pragma once

// Internal wiring between the kernel translation units and the dispatcher.
// Not installed; include only from src/kernels/.

#include "dcnet/kernels.hpp"

namespace dcnet::kernels::detail {

const Ops<float>& scalar_ops_f32();
const Ops<double>& scalar_ops_f64();

#if defined(__x86_64__) || defined(_M_X64)
const Ops<float>& avx2_ops_f32();
const Ops<double>& avx2_ops_f64();
#endif

#if defined(__aarch64__) || defined(__ARM_NEON)
const Ops<float>& neon_ops_f32();
const Ops<double>& neon_ops_f64();
#endif

}  // namespace dcnet::kernels::detail
