#pragma once

#include "tabcal/kernels.hpp"

namespace tabcal::kernels::detail {

extern const KernelTable kScalarTable;

#if defined(__x86_64__) || defined(_M_X64)
#define TABCAL_HAVE_AVX2_KERNELS 1
extern const KernelTable kAvx2Table;
#else
#define TABCAL_HAVE_AVX2_KERNELS 0
#endif

}  // namespace tabcal::kernels::detail
