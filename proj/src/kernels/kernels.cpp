#include "modrelu/kernels.hpp"

#include <atomic>
#include <cstdlib>

namespace modrelu::kernels {

const KernelTable* avx2_table();  // null when unsupported at compile time
const KernelTable* neon_table();

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* table_by_name(const std::string& name) {
    if (name == "scalar") return &scalar_table();
    if (name == "avx2" && avx2_table() && cpu_has_avx2()) return avx2_table();
    if (name == "neon" && neon_table()) return neon_table();
    return nullptr;
}

const KernelTable* best_table() {
    if (const KernelTable* t = table_by_name("avx2")) return t;
    if (const KernelTable* t = table_by_name("neon")) return t;
    return &scalar_table();
}

std::atomic<const KernelTable*> g_active{nullptr};

const KernelTable* init_from_env() {
    if (const char* env = std::getenv("MODRELU_SIMD")) {
        std::string want(env);
        if (!want.empty() && want != "auto") {
            if (const KernelTable* t = table_by_name(want)) return t;
            // Unsupported request: fall through to auto rather than crash.
        }
    }
    return best_table();
}

}  // namespace

const KernelTable& active() {
    const KernelTable* t = g_active.load(std::memory_order_acquire);
    if (!t) {
        t = init_from_env();
        g_active.store(t, std::memory_order_release);
    }
    return *t;
}

bool set_backend(const std::string& name) {
    const KernelTable* t = (name == "auto") ? best_table() : table_by_name(name);
    if (!t) return false;
    g_active.store(t, std::memory_order_release);
    return true;
}

std::vector<std::string> supported_backends() {
    std::vector<std::string> out{"scalar"};
    if (table_by_name("avx2")) out.emplace_back("avx2");
    if (table_by_name("neon")) out.emplace_back("neon");
    return out;
}

}  // namespace modrelu::kernels
