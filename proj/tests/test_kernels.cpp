#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <vector>

#include "genemut/kernels.hpp"
#include "genemut/rng.hpp"

using namespace genemut;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-2.0, 2.0);
    return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// Textbook j-inner product; per-element accumulation over k in index order,
// the ordering contract every lane must honor.
std::vector<double> gemm_naive(std::size_t m, std::size_t k, std::size_t n,
                               const std::vector<double>& a,
                               const std::vector<double>& b) {
    std::vector<double> c(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) {
                acc += a[i * k + kk] * b[kk * n + j];
            }
            c[i * n + j] = acc;
        }
    }
    return c;
}

std::vector<const kernels::KernelTable*> available_tables() {
    std::vector<const kernels::KernelTable*> out{&kernels::scalar_table()};
    for (const char* name : {"avx2", "neon"}) {
        if (const auto* t = kernels::table_for(name)) out.push_back(t);
    }
    return out;
}

}  // namespace

TEST_CASE("gemm_nn matches the naive oracle exactly in every lane") {
    Rng rng(101);
    for (const auto* table : available_tables()) {
        for (int trial = 0; trial < 40; ++trial) {
            const std::size_t m = 1 + rng.below(9);
            const std::size_t k = 1 + rng.below(9);
            const std::size_t n = 1 + rng.below(9);
            auto a = random_vec(rng, m * k);
            auto b = random_vec(rng, k * n);
            std::vector<double> c(m * n, -1.0);
            table->gemm_nn(m, k, n, a.data(), b.data(), c.data());
            CHECK(bit_equal(c, gemm_naive(m, k, n, a, b)));
        }
    }
}

TEST_CASE("SIMD lanes are bit-identical to scalar on ragged sizes") {
    Rng rng(202);
    for (const auto* table : available_tables()) {
        if (table == &kernels::scalar_table()) continue;
        INFO("lane: ", table->name);
        for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 15u, 64u, 129u}) {
            auto a = random_vec(rng, n);
            auto b = random_vec(rng, n);
            std::vector<double> got(n), want(n);

            table->add(a.data(), b.data(), got.data(), n);
            kernels::scalar_table().add(a.data(), b.data(), want.data(), n);
            CHECK(bit_equal(got, want));

            table->sub(a.data(), b.data(), got.data(), n);
            kernels::scalar_table().sub(a.data(), b.data(), want.data(), n);
            CHECK(bit_equal(got, want));

            table->mul(a.data(), b.data(), got.data(), n);
            kernels::scalar_table().mul(a.data(), b.data(), want.data(), n);
            CHECK(bit_equal(got, want));

            table->scale(a.data(), 0.37, got.data(), n);
            kernels::scalar_table().scale(a.data(), 0.37, want.data(), n);
            CHECK(bit_equal(got, want));

            got = b;
            want = b;
            table->axpy(-1.75, a.data(), got.data(), n);
            kernels::scalar_table().axpy(-1.75, a.data(), want.data(), n);
            CHECK(bit_equal(got, want));
        }
        for (int trial = 0; trial < 30; ++trial) {
            const std::size_t m = 1 + rng.below(13);
            const std::size_t k = 1 + rng.below(13);
            const std::size_t n = 1 + rng.below(13);
            auto a = random_vec(rng, m * k);
            auto b = random_vec(rng, k * n);
            std::vector<double> got(m * n), want(m * n);
            table->gemm_nn(m, k, n, a.data(), b.data(), got.data());
            kernels::scalar_table().gemm_nn(m, k, n, a.data(), b.data(), want.data());
            CHECK(bit_equal(got, want));
        }
    }
}

TEST_CASE("transpose round trip") {
    Rng rng(303);
    auto a = random_vec(rng, 5 * 7);
    std::vector<double> at(7 * 5), back(5 * 7);
    kernels::transpose(5, 7, a.data(), at.data());
    kernels::transpose(7, 5, at.data(), back.data());
    CHECK(bit_equal(a, back));
    CHECK(at[2 * 5 + 3] == a[3 * 7 + 2]);
}

TEST_CASE("set_active swaps and restores the dispatch table") {
    const auto& before = kernels::active();
    const auto& prev = kernels::set_active(kernels::scalar_table());
    CHECK(std::string(kernels::active().name) == "scalar");
    kernels::set_active(prev);
    CHECK(std::string(kernels::active().name) == std::string(before.name));
}
