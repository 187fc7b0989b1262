#pragma once

#include "cfsl/kernels.hpp"

namespace cfsl::kernels {

const KernelTable& scalar_table();

#if defined(CFSL_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

}  // namespace cfsl::kernels
