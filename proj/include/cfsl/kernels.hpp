#pragma once

// Dense arithmetic kernels behind the network and prototype code.
//
// Every kernel has a portable scalar reference (kernels_reference.hpp) and,
// on x86-64, an AVX2+FMA variant compiled in its own translation unit. The
// active table is chosen once at startup from CPUID; CFSL_KERNELS=scalar|avx2
// or select_isa() overrides it. Double precision always runs the reference.

#include <cstddef>
#include <string>
#include <string_view>
#include <type_traits>

#include "cfsl/kernels_reference.hpp"

namespace cfsl::kernels {

enum class Isa { scalar, avx2 };

using GemmFn = void (*)(Trans, Trans, int m, int n, int k, float alpha, const float* a, int lda,
                        const float* b, int ldb, float beta, float* c, int ldc);
using DotFn = float (*)(const float*, const float*, std::size_t);
using AxpyFn = void (*)(std::size_t, float, const float*, float*);
using SqDistFn = float (*)(const float*, const float*, std::size_t);

struct KernelTable {
    Isa isa;
    const char* name;
    GemmFn sgemm;
    DotFn sdot;
    AxpyFn saxpy;
    SqDistFn ssqdist;
};

bool isa_available(Isa isa);
Isa best_isa();
const KernelTable& table_for(Isa isa);  // throws cfsl::ConfigError if unavailable
const KernelTable& active();
void select_isa(Isa isa);
std::string_view isa_name(Isa isa);
Isa parse_isa(std::string_view name);  // "scalar" | "avx2" | "auto"

// RAII override of the active table, for tests and benchmarks.
class ScopedIsa {
public:
    explicit ScopedIsa(Isa isa) : previous_(active().isa) { select_isa(isa); }
    ~ScopedIsa() { select_isa(previous_); }
    ScopedIsa(const ScopedIsa&) = delete;
    ScopedIsa& operator=(const ScopedIsa&) = delete;

private:
    Isa previous_;
};

template <class T>
void gemm(Trans ta, Trans tb, int m, int n, int k, T alpha, const T* a, int lda, const T* b, int ldb,
          T beta, T* c, int ldc) {
    if constexpr (std::is_same_v<T, float>) {
        active().sgemm(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
    } else {
        reference::gemm<T>(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
    }
}

template <class T>
T dot(const T* x, const T* y, std::size_t n) {
    if constexpr (std::is_same_v<T, float>) {
        return active().sdot(x, y, n);
    } else {
        return reference::dot<T>(x, y, n);
    }
}

template <class T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
    if constexpr (std::is_same_v<T, float>) {
        active().saxpy(n, alpha, x, y);
    } else {
        reference::axpy<T>(n, alpha, x, y);
    }
}

template <class T>
T squared_distance(const T* x, const T* y, std::size_t n) {
    if constexpr (std::is_same_v<T, float>) {
        return active().ssqdist(x, y, n);
    } else {
        return reference::squared_distance<T>(x, y, n);
    }
}

}  // namespace cfsl::kernels
