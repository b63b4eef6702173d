#include "genemut/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace genemut::kernels {

const KernelTable* avx2_table();  // nullptr off-x86
const KernelTable* neon_table();  // nullptr off-aarch64

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const KernelTable* pick_default() {
    if (const KernelTable* t = avx2_table(); t && cpu_has_avx2()) return t;
    if (const KernelTable* t = neon_table()) return t;
    return &scalar_table();
}

const KernelTable* pick_startup() {
    if (const char* env = std::getenv("GENEMUT_KERNELS")) {
        const KernelTable* t = table_for(env);
        if (!t) {
            throw std::runtime_error(
                std::string("GENEMUT_KERNELS=") + env +
                " is not available on this machine (want scalar, avx2 or neon)");
        }
        return t;
    }
    return pick_default();
}

const KernelTable*& active_slot() {
    static const KernelTable* slot = pick_startup();
    return slot;
}

}  // namespace

const KernelTable* table_for(std::string_view name) {
    if (name == "scalar") return &scalar_table();
    if (name == "avx2") return cpu_has_avx2() ? avx2_table() : nullptr;
    if (name == "neon") return neon_table();
    return nullptr;
}

const KernelTable& active() { return *active_slot(); }

const KernelTable& set_active(const KernelTable& table) {
    const KernelTable* prev = active_slot();
    active_slot() = &table;
    return *prev;
}

}  // namespace genemut::kernels
