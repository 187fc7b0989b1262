#pragma once

// Scalar reference kernels. These define the semantics every SIMD variant
// is tested against.

#include <cstddef>

namespace cfsl::kernels {

enum class Trans { no, yes };

namespace reference {

// C = alpha * op(A) * op(B) + beta * C, row-major.
// op(A) is m x k, op(B) is k x n. beta == 0 overwrites C without reading it.
template <class T>
void gemm(Trans ta, Trans tb, int m, int n, int k, T alpha, const T* a, int lda, const T* b, int ldb,
          T beta, T* c, int ldc) {
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
        if (beta == T(0)) {
            for (int j = 0; j < n; ++j) crow[j] = T(0);
        } else if (beta != T(1)) {
            for (int j = 0; j < n; ++j) crow[j] *= beta;
        }
    }
    if (m == 0 || n == 0 || k == 0) return;

    auto at = [&](int i, int p) {
        return ta == Trans::no ? a[static_cast<std::ptrdiff_t>(i) * lda + p]
                               : a[static_cast<std::ptrdiff_t>(p) * lda + i];
    };
    if (tb == Trans::no) {
        for (int i = 0; i < m; ++i) {
            T* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
            for (int p = 0; p < k; ++p) {
                const T s = alpha * at(i, p);
                const T* brow = b + static_cast<std::ptrdiff_t>(p) * ldb;
                for (int j = 0; j < n; ++j) crow[j] += s * brow[j];
            }
        }
    } else {
        for (int i = 0; i < m; ++i) {
            T* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
            for (int j = 0; j < n; ++j) {
                const T* brow = b + static_cast<std::ptrdiff_t>(j) * ldb;
                T acc = T(0);
                for (int p = 0; p < k; ++p) acc += at(i, p) * brow[p];
                crow[j] += alpha * acc;
            }
        }
    }
}

template <class T>
T dot(const T* x, const T* y, std::size_t n) {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

template <class T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
T squared_distance(const T* x, const T* y, std::size_t n) {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        const T d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

}  // namespace reference
}  // namespace cfsl::kernels
