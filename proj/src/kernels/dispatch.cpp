#include <atomic>
#include <cstdlib>
#include <string>

#include "cfsl/error.hpp"
#include "cfsl/kernels.hpp"
#include "variants.hpp"

namespace cfsl::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(CFSL_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* initial_table() {
    Isa isa = best_isa();
    if (const char* env = std::getenv("CFSL_KERNELS")) {
        isa = parse_isa(env);
        if (!isa_available(isa)) isa = Isa::scalar;
    }
    return &table_for(isa);
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> table{initial_table()};
    return table;
}

}  // namespace

bool isa_available(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return true;
        case Isa::avx2: {
            static const bool has = cpu_has_avx2();
            return has;
        }
    }
    return false;
}

Isa best_isa() { return isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar; }

const KernelTable& table_for(Isa isa) {
    if (!isa_available(isa)) {
        throw ConfigError("kernel set '" + std::string(isa_name(isa)) + "' is not supported on this CPU");
    }
    switch (isa) {
        case Isa::scalar:
            return scalar_table();
        case Isa::avx2:
#if defined(CFSL_HAVE_AVX2)
            return avx2_table();
#else
            break;
#endif
    }
    return scalar_table();
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select_isa(Isa isa) { current().store(&table_for(isa), std::memory_order_release); }

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return "scalar";
        case Isa::avx2:
            return "avx2";
    }
    return "unknown";
}

Isa parse_isa(std::string_view name) {
    if (name == "scalar") return Isa::scalar;
    if (name == "avx2") return Isa::avx2;
    if (name == "auto" || name.empty()) return best_isa();
    throw ConfigError("unknown kernel set '" + std::string(name) + "' (expected scalar, avx2 or auto)");
}

}  // namespace cfsl::kernels
