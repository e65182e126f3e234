#pragma once

#include "trajpred/simd/kernels.hpp"

namespace trajpred::simd::detail {

const KernelTable& scalar_table();
#if defined(TRAJPRED_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

}  // namespace trajpred::simd::detail
