#include "variants.hpp"

namespace cfsl::kernels {
namespace {

void sgemm_scalar(Trans ta, Trans tb, int m, int n, int k, float alpha, const float* a, int lda,
                  const float* b, int ldb, float beta, float* c, int ldc) {
    reference::gemm<float>(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

float sdot_scalar(const float* x, const float* y, std::size_t n) { return reference::dot(x, y, n); }

void saxpy_scalar(std::size_t n, float alpha, const float* x, float* y) {
    reference::axpy(n, alpha, x, y);
}

float ssqdist_scalar(const float* x, const float* y, std::size_t n) {
    return reference::squared_distance(x, y, n);
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{Isa::scalar, "scalar", &sgemm_scalar, &sdot_scalar, &saxpy_scalar,
                                   &ssqdist_scalar};
    return table;
}

}  // namespace cfsl::kernels
