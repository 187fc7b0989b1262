// AVX2 + FMA variants. This file is compiled with -mavx2 -mfma and must only
// be entered after the dispatcher has confirmed CPU support.

#include "variants.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cstdint>
#include <vector>

namespace cfsl::kernels {
namespace {

inline float hsum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
}

// Lane mask with the first `count` lanes (0..8) enabled.
inline __m256i lane_mask(int count) {
    static const std::int32_t table[16] = {-1, -1, -1, -1, -1, -1, -1, -1, 0, 0, 0, 0, 0, 0, 0, 0};
    return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(table + 8 - count));
}

// R x 16 register tile of C += alpha * A[rows, 0:k] * B[0:k, cols].
// `width` (1..16) is the number of live columns; partial vectors are masked.
template <int R>
void tile(int k, float alpha, const float* a, int lda, const float* b, int ldb, float* c, int ldc,
          int width) {
    const int w0 = width >= 8 ? 8 : width;
    const int w1 = width >= 8 ? width - 8 : 0;
    const __m256i m0 = lane_mask(w0);
    const __m256i m1 = lane_mask(w1);

    __m256 acc0[R];
    __m256 acc1[R];
    for (int r = 0; r < R; ++r) {
        acc0[r] = _mm256_setzero_ps();
        acc1[r] = _mm256_setzero_ps();
    }
    if (width == 16) {
        for (int p = 0; p < k; ++p) {
            const float* brow = b + static_cast<std::ptrdiff_t>(p) * ldb;
            const __m256 b0 = _mm256_loadu_ps(brow);
            const __m256 b1 = _mm256_loadu_ps(brow + 8);
            for (int r = 0; r < R; ++r) {
                const __m256 av = _mm256_broadcast_ss(a + static_cast<std::ptrdiff_t>(r) * lda + p);
                acc0[r] = _mm256_fmadd_ps(av, b0, acc0[r]);
                acc1[r] = _mm256_fmadd_ps(av, b1, acc1[r]);
            }
        }
    } else {
        for (int p = 0; p < k; ++p) {
            const float* brow = b + static_cast<std::ptrdiff_t>(p) * ldb;
            const __m256 b0 = _mm256_maskload_ps(brow, m0);
            const __m256 b1 = w1 > 0 ? _mm256_maskload_ps(brow + 8, m1) : _mm256_setzero_ps();
            for (int r = 0; r < R; ++r) {
                const __m256 av = _mm256_broadcast_ss(a + static_cast<std::ptrdiff_t>(r) * lda + p);
                acc0[r] = _mm256_fmadd_ps(av, b0, acc0[r]);
                acc1[r] = _mm256_fmadd_ps(av, b1, acc1[r]);
            }
        }
    }

    const __m256 va = _mm256_set1_ps(alpha);
    for (int r = 0; r < R; ++r) {
        float* crow = c + static_cast<std::ptrdiff_t>(r) * ldc;
        if (width == 16) {
            _mm256_storeu_ps(crow, _mm256_fmadd_ps(va, acc0[r], _mm256_loadu_ps(crow)));
            _mm256_storeu_ps(crow + 8, _mm256_fmadd_ps(va, acc1[r], _mm256_loadu_ps(crow + 8)));
        } else {
            _mm256_maskstore_ps(crow, m0, _mm256_fmadd_ps(va, acc0[r], _mm256_maskload_ps(crow, m0)));
            if (w1 > 0) {
                _mm256_maskstore_ps(crow + 8, m1,
                                    _mm256_fmadd_ps(va, acc1[r], _mm256_maskload_ps(crow + 8, m1)));
            }
        }
    }
}

// Row-major copy of op(X), rows x cols.
void pack(Trans t, int rows, int cols, const float* x, int ldx, std::vector<float>& out) {
    out.resize(static_cast<std::size_t>(rows) * cols);
    if (t == Trans::no) {
        for (int i = 0; i < rows; ++i) {
            const float* src = x + static_cast<std::ptrdiff_t>(i) * ldx;
            std::copy(src, src + cols, out.data() + static_cast<std::ptrdiff_t>(i) * cols);
        }
    } else {
        for (int p = 0; p < cols; ++p) {
            const float* src = x + static_cast<std::ptrdiff_t>(p) * ldx;
            for (int i = 0; i < rows; ++i) out[static_cast<std::size_t>(i) * cols + p] = src[i];
        }
    }
}

void sgemm_avx2(Trans ta, Trans tb, int m, int n, int k, float alpha, const float* a, int lda,
                const float* b, int ldb, float beta, float* c, int ldc) {
    for (int i = 0; i < m; ++i) {
        float* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
        if (beta == 0.0f) {
            std::fill(crow, crow + n, 0.0f);
        } else if (beta != 1.0f) {
            const __m256 vb = _mm256_set1_ps(beta);
            int j = 0;
            for (; j + 8 <= n; j += 8) _mm256_storeu_ps(crow + j, _mm256_mul_ps(vb, _mm256_loadu_ps(crow + j)));
            for (; j < n; ++j) crow[j] *= beta;
        }
    }
    if (m == 0 || n == 0 || k == 0) return;

    thread_local std::vector<float> apack;
    thread_local std::vector<float> bpack;
    if (ta == Trans::yes) {
        pack(ta, m, k, a, lda, apack);
        a = apack.data();
        lda = k;
    }
    if (tb == Trans::yes) {
        pack(tb, k, n, b, ldb, bpack);
        b = bpack.data();
        ldb = n;
    }

    for (int j = 0; j < n; j += 16) {
        const int width = n - j >= 16 ? 16 : n - j;
        int i = 0;
        for (; i + 4 <= m; i += 4) {
            tile<4>(k, alpha, a + static_cast<std::ptrdiff_t>(i) * lda, lda, b + j, ldb,
                    c + static_cast<std::ptrdiff_t>(i) * ldc + j, ldc, width);
        }
        for (; i < m; ++i) {
            tile<1>(k, alpha, a + static_cast<std::ptrdiff_t>(i) * lda, lda, b + j, ldb,
                    c + static_cast<std::ptrdiff_t>(i) * ldc + j, ldc, width);
        }
    }
}

float sdot_avx2(const float* x, const float* y, std::size_t n) {
    __m256 acc0 = _mm256_setzero_ps();
    __m256 acc1 = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8), acc1);
    }
    for (; i + 8 <= n; i += 8) acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
    float s = hsum(_mm256_add_ps(acc0, acc1));
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

void saxpy_avx2(std::size_t n, float alpha, const float* x, float* y) {
    const __m256 va = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

float ssqdist_avx2(const float* x, const float* y, std::size_t n) {
    __m256 acc0 = _mm256_setzero_ps();
    __m256 acc1 = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        const __m256 d0 = _mm256_sub_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i));
        const __m256 d1 = _mm256_sub_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8));
        acc0 = _mm256_fmadd_ps(d0, d0, acc0);
        acc1 = _mm256_fmadd_ps(d1, d1, acc1);
    }
    for (; i + 8 <= n; i += 8) {
        const __m256 d0 = _mm256_sub_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i));
        acc0 = _mm256_fmadd_ps(d0, d0, acc0);
    }
    float s = hsum(_mm256_add_ps(acc0, acc1));
    for (; i < n; ++i) {
        const float d = x[i] - y[i];
        s += d * d;
    }
    return s;
}

}  // namespace

const KernelTable& avx2_table() {
    static const KernelTable table{Isa::avx2, "avx2", &sgemm_avx2, &sdot_avx2, &saxpy_avx2, &ssqdist_avx2};
    return table;
}

}  // namespace cfsl::kernels
