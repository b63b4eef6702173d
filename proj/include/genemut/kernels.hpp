#pragma once

#include <cstddef>
#include <string_view>

// Low-level dense double-precision kernels. Every entry point has a scalar
// reference implementation plus SIMD variants (AVX2 on x86-64, NEON on
// aarch64) selected once at startup from CPU capabilities. All variants are
// written to produce bit-identical results: per output element the
// accumulation order matches the scalar reference, and no FMA contraction is
// used in any lane (the build sets -ffp-contract=off).
//
// Set GENEMUT_KERNELS=scalar|avx2|neon to force a lane.

namespace genemut::kernels {

struct KernelTable {
    const char* name;

    // out[i] = a[i] (+|-|*) b[i]
    void (*add)(const double* a, const double* b, double* out, std::size_t n);
    void (*sub)(const double* a, const double* b, double* out, std::size_t n);
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);

    // out[i] = a[i] * s
    void (*scale)(const double* a, double s, double* out, std::size_t n);

    // y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

    // C[m x n] = A[m x k] * B[k x n], row-major, C overwritten.
    // Accumulates over k in index order for every output element.
    void (*gemm_nn)(std::size_t m, std::size_t k, std::size_t n,
                    const double* a, const double* b, double* c);
};

// Table chosen at startup (env override, then best supported ISA).
const KernelTable& active();

const KernelTable& scalar_table();

// nullptr if the lane is not compiled in or not supported by this CPU.
const KernelTable* table_for(std::string_view name);

// Swap the active table; returns the previous one. Used by the equivalence
// tests to drive both lanes over the same inputs.
const KernelTable& set_active(const KernelTable& table);

// AT[c x r] = transpose of A[r x c]. Memory shuffle, one lane only.
void transpose(std::size_t rows, std::size_t cols, const double* a, double* at);

}  // namespace genemut::kernels
