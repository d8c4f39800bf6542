#include "nw/kernels.hpp"

#include "nw/error.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

namespace nw::kernels {

#ifndef NW_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif

bool cpu_supports(Isa isa) {
    switch (isa) {
    case Isa::scalar:
        return true;
    case Isa::avx2:
#if defined(NW_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
        return false;
#endif
    }
    return false;
}

namespace {

const KernelTable* initial_table() {
    if (const char* env = std::getenv("NW_KERNELS"); env != nullptr && std::string_view(env) == "scalar") {
        return &scalar_table();
    }
    if (cpu_supports(Isa::avx2) && avx2_table() != nullptr) {
        return avx2_table();
    }
    return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> table{initial_table()};
    return table;
}

} // namespace

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select(Isa isa) {
    if (isa == Isa::scalar) {
        current().store(&scalar_table(), std::memory_order_release);
        return;
    }
    if (!cpu_supports(isa) || avx2_table() == nullptr) {
        fail(ErrorKind::Unsupported, "requested kernel ISA is not available on this machine");
    }
    current().store(avx2_table(), std::memory_order_release);
}

} // namespace nw::kernels
