#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "genemut/autodiff.hpp"
#include "genemut/errors.hpp"
#include "genemut/optim.hpp"
#include "genemut/rng.hpp"
#include "genemut/tensor.hpp"

using namespace genemut;
using ad::Tape;
using ad::Var;

namespace {

Tensor random_mat(Rng& rng, std::size_t r, std::size_t c, double lo = -1.5,
                  double hi = 1.5) {
    Tensor t(r, c);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

Tensor random_vecT(Rng& rng, std::size_t n, double lo = -1.5, double hi = 1.5) {
    Tensor t = Tensor::vec(n);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_CASE("matmul identity and hand-checked product") {
    Tape tape;
    Tensor m(2, 2);
    m.data = {1.0, 2.0, 3.0, 4.0};
    Var a = tape.constant(Tensor::identity(2));
    Var b = tape.constant(m);
    Var c = tape.matmul(a, b);
    CHECK(c->value.data == m.data);

    Tensor rhs(2, 1);
    rhs.data = {5.0, 6.0};
    Var d = tape.matmul(tape.constant(m), tape.constant(rhs));
    CHECK(d->value.at(0, 0) == 17.0);
    CHECK(d->value.at(1, 0) == 39.0);
}

TEST_CASE("matmul dimension error names both shapes") {
    Tape tape;
    Var a = tape.constant(Tensor(2, 3, 1.0));
    Var b = tape.constant(Tensor(4, 2, 1.0));
    try {
        tape.matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("2x3") != std::string::npos);
        CHECK(msg.find("4x2") != std::string::npos);
    }
}

TEST_CASE("softmax rows: symmetry, stability, frozen value") {
    Tape tape;
    Tensor m(1, 3, 0.0);
    Var s = tape.softmax_rows(tape.constant(m));
    for (double v : s->value.data) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

    Tensor big(1, 2);
    big.data = {1000.0, 0.0};
    Var s2 = tape.softmax_rows(tape.constant(big));
    CHECK(s2->value.data[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s2->value.data[1] < 1e-300);

    Tensor t(1, 2);
    t.data = {1.0, 2.0};
    Var s3 = tape.softmax_rows(tape.constant(t));
    CHECK(s3->value.data[0] == doctest::Approx(0.2689414213699951).epsilon(1e-14));
    CHECK(s3->value.data[1] == doctest::Approx(0.7310585786300049).epsilon(1e-14));
}

TEST_CASE("softmax rows sum to one and shift invariance") {
    Rng rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t r = 1 + rng.below(6), c = 1 + rng.below(6);
        Tensor m = random_mat(rng, r, c, -5.0, 5.0);
        Tensor shifted = m;
        std::vector<double> offs(r);
        for (std::size_t i = 0; i < r; ++i) {
            offs[i] = rng.uniform(-50.0, 50.0);
            for (std::size_t j = 0; j < c; ++j) shifted.at(i, j) += offs[i];
        }
        Tensor a = ad::softmax_rows_value(m);
        Tensor b = ad::softmax_rows_value(shifted);
        for (std::size_t i = 0; i < r; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                sum += a.at(i, j);
                CHECK(std::fabs(a.at(i, j) - b.at(i, j)) <= 1e-12);
            }
            CHECK(std::fabs(sum - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("softmax -inf sentinel masks an entry; all -inf row is an error") {
    const double ninf = -std::numeric_limits<double>::infinity();
    Tensor m(1, 3);
    m.data = {0.0, ninf, 0.0};
    Tensor y = ad::softmax_rows_value(m);
    CHECK(y.data[1] == 0.0);
    CHECK(y.data[0] == doctest::Approx(0.5));

    Tensor bad(1, 2);
    bad.data = {ninf, ninf};
    CHECK_THROWS_AS(ad::softmax_rows_value(bad), NumericError);
}

TEST_CASE("layer_norm: constant row, closed form, zero gain") {
    Tape tape;
    Var gain = tape.constant(Tensor::vec(3, 1.0));
    Var bias = tape.constant(Tensor::vec(3, 0.0));
    Var x = tape.constant(Tensor(1, 3, 4.2));
    Var y = tape.layer_norm(x, gain, bias, 1e-8);
    for (double v : y->value.data) CHECK(v == doctest::Approx(0.0).epsilon(1e-10));

    Tensor two(1, 2);
    two.data = {1.0, 3.0};
    Var g2 = tape.constant(Tensor::vec(2, 1.0));
    Var b2 = tape.constant(Tensor::vec(2, 0.0));
    Var y2 = tape.layer_norm(tape.constant(two), g2, b2, 1e-12);
    CHECK(y2->value.data[0] == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(y2->value.data[1] == doctest::Approx(1.0).epsilon(1e-9));

    Tensor b3v = Tensor::vec(2);
    b3v.data = {0.5, -0.25};
    Var y3 = tape.layer_norm(tape.constant(two), tape.constant(Tensor::vec(2, 0.0)),
                             tape.constant(b3v), 1e-8);
    CHECK(y3->value.data[0] == 0.5);
    CHECK(y3->value.data[1] == -0.25);
}

TEST_CASE("backward: sum gives ones, square gives 2x, tape is consumed") {
    Tape tape;
    Var w = tape.leaf(Tensor(2, 3, 0.5), true);
    Var loss = tape.sum(w);
    tape.backward(loss);
    for (double g : w->grad.data) CHECK(g == 1.0);
    CHECK(tape.last_backward_visits() == tape.size());
    CHECK(tape.consumed());
    CHECK_THROWS_AS(tape.backward(loss), ContractError);

    Tape tape2;
    Var x = tape2.leaf(Tensor::vec(1, 3.0), true);
    Var sq = tape2.hadamard(x, x);
    Var l2 = tape2.sum(sq);
    tape2.backward(l2);
    CHECK(x->grad.data[0] == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("backward rejects a non-scalar seed") {
    Tape tape;
    Var w = tape.leaf(Tensor(2, 2, 1.0), true);
    Var y = tape.scale(w, 2.0);
    CHECK_THROWS_AS(tape.backward(y), ContractError);
}

namespace {

// Chain touching most primitives; parameters are A, B, bias, gain, beta, V, W.
double big_chain(const ParamStore& params, ParamStore* grads) {
    Tape tape;
    Var a = tape.leaf(params.at("a"), true);
    Var b = tape.leaf(params.at("b"), true);
    Var bias = tape.leaf(params.at("bias"), true);
    Var gain = tape.leaf(params.at("gain"), true);
    Var beta = tape.leaf(params.at("beta"), true);
    Var v = tape.leaf(params.at("v"), true);
    Var w = tape.leaf(params.at("w"), true);

    Var t = tape.matmul(a, b);
    t = tape.add_row_bias(t, bias);
    t = tape.scale(t, 0.9);
    t = tape.softmax_rows(t);
    t = tape.layer_norm(t, gain, beta, 1e-5);
    t = tape.relu(t);
    t = tape.hadamard(t, v);
    Var u = tape.matmul_nt(t, w);
    u = tape.sigmoid(u);
    Var pooled = tape.mean_rows(u);
    Var scaled = tape.mul_row_broadcast(u, pooled);
    Var loss = tape.sum(scaled);

    const double out = loss->value.data[0];
    if (grads) {
        tape.backward(loss);
        grads->at("a") = a->grad;
        grads->at("b") = b->grad;
        grads->at("bias") = bias->grad;
        grads->at("gain") = gain->grad;
        grads->at("beta") = beta->grad;
        grads->at("v") = v->grad;
        grads->at("w") = w->grad;
    }
    return out;
}

double small_chain(const ParamStore& params, ParamStore* grads) {
    Tape tape;
    Var p = tape.leaf(params.at("p"), true);
    Var q = tape.leaf(params.at("q"), true);
    Var r = tape.leaf(params.at("r"), true);

    Var d = tape.sub(p, q);
    Var dots = tape.rowwise_dot(d, tape.add(p, q));
    Var y = tape.matvec(r, dots);
    Var loss = tape.sum(y);

    const double out = loss->value.data[0];
    if (grads) {
        tape.backward(loss);
        grads->at("p") = p->grad;
        grads->at("q") = q->grad;
        grads->at("r") = r->grad;
    }
    return out;
}

}  // namespace

TEST_CASE("gradient soundness: finite differences across 20 seeds") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        const std::size_t m = 2 + rng.below(4);
        const std::size_t k = 2 + rng.below(4);
        const std::size_t n = 2 + rng.below(4);
        const std::size_t p = 2 + rng.below(4);

        ParamStore params;
        params.add("a", random_mat(rng, m, k));
        params.add("b", random_mat(rng, k, n));
        params.add("bias", random_vecT(rng, n));
        params.add("gain", random_vecT(rng, n, 0.5, 1.5));
        params.add("beta", random_vecT(rng, n));
        params.add("v", random_mat(rng, m, n));
        params.add("w", random_mat(rng, p, n));
        FdReport rep = finite_diff_check(big_chain, params, 1e-4, 1e-4);
        INFO("seed ", seed, " worst ", rep.worst_param, " err ", rep.max_rel_err);
        CHECK(rep.pass);

        ParamStore params2;
        params2.add("p", random_mat(rng, m, k));
        params2.add("q", random_mat(rng, m, k));
        params2.add("r", random_mat(rng, n, m));
        FdReport rep2 = finite_diff_check(small_chain, params2, 1e-4, 1e-4);
        INFO("seed ", seed, " worst ", rep2.worst_param, " err ", rep2.max_rel_err);
        CHECK(rep2.pass);
    }
}

TEST_CASE("finite_diff_check: quadratic form is exact to 1e-8") {
    Rng rng(99);
    const std::size_t n = 5;
    const Tensor a = random_mat(rng, n, n);
    ParamStore params;
    params.add("x", random_vecT(rng, n));
    auto quad = [&a](const ParamStore& ps, ParamStore* grads) {
        Tape tape;
        Var x = tape.leaf(ps.at("x"), true);
        Var ax = tape.matvec(tape.constant(a), x);
        Var y = tape.sum(tape.hadamard(x, ax));
        const double out = y->value.data[0];
        if (grads) {
            tape.backward(y);
            grads->at("x") = x->grad;
        }
        return out;
    };
    FdReport rep = finite_diff_check(quad, params, 1e-4, 1e-8);
    CHECK(rep.pass);
    CHECK(rep.max_rel_err <= 1e-8);
}

TEST_CASE("finite_diff_check: corrupted adjoint is caught and named") {
    ParamStore params;
    params.add("good", Tensor::vec(2, 0.3));
    params.add("evil", Tensor::vec(2, -0.2));
    auto f = [](const ParamStore& ps, ParamStore* grads) {
        double out = 0.0;
        for (const auto& name : ps.names()) {
            for (double v : ps.at(name).data) out += v * v;
        }
        if (grads) {
            for (const auto& name : ps.names()) {
                Tensor g = ps.at(name);
                for (double& v : g.data) v *= 2.0;
                if (name == "evil") g.data[1] += 0.5;  // deliberate corruption
                grads->at(name) = g;
            }
        }
        return out;
    };
    FdReport rep = finite_diff_check(f, params, 1e-4, 1e-6);
    CHECK_FALSE(rep.pass);
    REQUIRE(rep.failures.size() == 1);
    CHECK(rep.failures[0].param == "evil");
    CHECK(rep.failures[0].index == 1);
}

TEST_CASE("finite_diff_check: non-deterministic objective is rejected") {
    ParamStore params;
    params.add("x", Tensor::vec(1, 1.0));
    int counter = 0;
    auto f = [&counter](const ParamStore&, ParamStore*) {
        return static_cast<double>(++counter);
    };
    CHECK_THROWS_AS(finite_diff_check(f, params, 1e-4, 1e-4), ContractError);

    auto ok = [](const ParamStore& ps, ParamStore* grads) {
        if (grads) grads->at("x").data[0] = 1.0;
        return ps.at("x").data[0];
    };
    CHECK_THROWS_AS(finite_diff_check(ok, params, 0.5, 1e-4), ContractError);
    CHECK_THROWS_AS(finite_diff_check(ok, params, 0.0, 1e-4), ContractError);
}

TEST_CASE("adam: zero gradients leave parameters unchanged at zero decay") {
    ParamStore params;
    params.add("w", Tensor(2, 2, 0.7));
    ParamStore grads = params.zeros_like();
    AdamState adam({.lr = 1e-4, .l2_weight = 0.0});
    adam.step(params, grads);
    for (double v : params.at("w").data) CHECK(v == 0.7);
    CHECK(adam.step_count() == 1);
}

TEST_CASE("adam: first-step update matches the hand-evaluated rule") {
    ParamStore params;
    params.add("w", Tensor::vec(1, 1.0));
    ParamStore grads = params.zeros_like();
    grads.at("w").data[0] = 1.0;
    const double lr = 1e-4;
    AdamState adam({.lr = lr, .l2_weight = 0.0});
    adam.step(params, grads);
    const double expected = 1.0 - lr * (1.0 / (1.0 + 1e-8));
    CHECK(params.at("w").data[0] == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("adam: NaN gradient aborts without mutation") {
    ParamStore params;
    params.add("a", Tensor::vec(2, 0.5));
    params.add("b", Tensor::vec(2, -0.5));
    ParamStore grads = params.zeros_like();
    grads.at("b").data[1] = std::nan("");
    AdamState adam;
    CHECK_THROWS_AS(adam.step(params, grads), NumericError);
    CHECK(params.at("a").data[0] == 0.5);
    CHECK(params.at("b").data[1] == -0.5);
    CHECK(adam.step_count() == 0);

    ParamStore missing;  // grads lacking a parameter
    CHECK_THROWS_AS(adam.step(params, missing), ContractError);
}

TEST_CASE("xavier: reproducible, bounded, correct fan sum") {
    Tensor a = xavier_init(4, 4, 1234);
    Tensor b = xavier_init(4, 4, 1234);
    CHECK(a.data == b.data);
    Tensor c = xavier_init(4, 4, 1235);
    CHECK(a.data != c.data);

    const double bound26 = std::sqrt(6.0 / 8.0);
    Tensor big = xavier_init(100, 100, 42);  // 1e4 draws
    const double bound_big = std::sqrt(6.0 / 200.0);
    for (double v : big.data) CHECK(std::fabs(v) <= bound_big);

    Tensor t26 = xavier_init(2, 6, 7);
    double mx = 0.0;
    for (double v : t26.data) {
        CHECK(std::fabs(v) <= bound26);
        mx = std::max(mx, std::fabs(v));
    }
    CHECK(mx > 0.0);
}

TEST_CASE("tensor serialization round trips bit-exactly") {
    Rng rng(5);
    Tensor t = random_mat(rng, 3, 4, -100.0, 100.0);
    t.data[0] = 5e-324;  // denormal
    t.data[1] = -0.0;
    const std::string path = "roundtrip.ten";
    t.save_file(path);
    Tensor back = Tensor::load_file(path);
    CHECK(back.shape == t.shape);
    CHECK(back.data == t.data);
    std::remove(path.c_str());
}

TEST_CASE("tensor load reports truncation") {
    const std::string path = "trunc.ten";
    {
        Tensor t(2, 2, 1.0);
        t.save_file(path);
    }
    // chop the payload
    {
        std::FILE* f = std::fopen(path.c_str(), "rb+");
        REQUIRE(f);
        std::fseek(f, 0, SEEK_END);
        long sz = std::ftell(f);
        REQUIRE(::truncate(path.c_str(), sz - 9) == 0);
        std::fclose(f);
    }
    try {
        Tensor::load_file(path);
        FAIL("expected IngestionError");
    } catch (const IngestionError& e) {
        CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("param store checkpoint round trip preserves order, shape, bits") {
    ParamStore ps;
    Rng rng(6);
    ps.add("kam.layer0.wq", random_mat(rng, 3, 3));
    ps.add("kam.layer0.ffn.b1", random_vecT(rng, 5));
    ps.add("dec.proj", random_mat(rng, 4, 3));
    const std::string path = "ckpt.params";
    ps.save_file(path);
    ParamStore back = ParamStore::load_file(path);
    REQUIRE(back.names() == ps.names());
    for (const auto& name : ps.names()) {
        CHECK(back.at(name).shape == ps.at(name).shape);
        CHECK(back.at(name).data == ps.at(name).data);
    }
    std::remove(path.c_str());
}

TEST_CASE("ops raise NumericError on non-finite results") {
    Tape tape;
    Tensor huge(1, 2, 1e308);
    Var a = tape.constant(huge);
    CHECK_THROWS_AS(tape.add(a, a), NumericError);
}
