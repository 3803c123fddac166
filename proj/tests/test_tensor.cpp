#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "powergear/errors.hpp"
#include "powergear/tensor.hpp"

using namespace powergear;
using powergear::testutil::max_grad_rel_err;

TEST_SUITE_BEGIN("tensor");

namespace {

std::vector<double> randvec(Rng& rng, std::size_t n, double lo = -1, double hi = 1) {
    std::vector<double> v(n);
    for (auto& x : v) x = rand_uniform(rng, lo, hi);
    return v;
}

} // namespace

TEST_CASE("matmul forward basics") {
    Tape tape;
    Tensor eye = tape.constant(2, 2, {1, 0, 0, 1});
    Tensor x = tape.constant(2, 2, {3, 4, 5, 6});
    CHECK(tape.matmul(eye, x).value() == std::vector<double>{3, 4, 5, 6});

    Tensor a = tape.constant(2, 2, {1, 2, 3, 4});
    Tensor b = tape.constant(2, 1, {1, 1});
    CHECK(tape.matmul(a, b).value() == std::vector<double>{3, 7});

    CHECK_THROWS_AS(tape.matmul(a, tape.constant(3, 1, {1, 1, 1})), ValidationError);
}

TEST_CASE("matmul gradients match finite differences on random 5x4 * 4x3") {
    Rng rng(31);
    auto a0 = randvec(rng, 20);
    auto b0 = randvec(rng, 12);
    // weight the output so every entry matters
    auto w = randvec(rng, 15);

    auto run = [&](const std::vector<double>& a, const std::vector<double>& b, Tape& tape,
                   Tensor* ta, Tensor* tb) {
        *ta = tape.leaf(5, 4, a, true);
        *tb = tape.leaf(4, 3, b, true);
        Tensor prod = tape.matmul(*ta, *tb);
        Tensor weights = tape.constant(3, 1, {w[0], w[1], w[2]});
        Tensor reduced = tape.matmul(prod, weights); // 5x1
        return tape.mean_all(reduced);
    };

    Tape tape;
    Tensor ta, tb;
    Tensor loss = run(a0, b0, tape, &ta, &tb);
    tape.backward(loss);

    auto fa = [&](const std::vector<double>& a) {
        Tape t2;
        Tensor x, y;
        return run(a, b0, t2, &x, &y).scalar();
    };
    auto fb = [&](const std::vector<double>& b) {
        Tape t2;
        Tensor x, y;
        return run(a0, b, t2, &x, &y).scalar();
    };
    CHECK(max_grad_rel_err(fa, a0, ta.grad()) < 1e-4);
    CHECK(max_grad_rel_err(fb, b0, tb.grad()) < 1e-4);
}

TEST_CASE("scatter_sum forward: empty input and hand sum") {
    Tape tape;
    Tensor empty = tape.constant(0, 3, {});
    Tensor z = tape.scatter_sum(empty, {}, 2);
    CHECK(z.value() == std::vector<double>{0, 0, 0, 0, 0, 0});

    Tensor rows = tape.constant(3, 1, {1, 2, 3});
    Tensor out = tape.scatter_sum(rows, {0, 0, 1}, 2);
    CHECK(out.value() == std::vector<double>{3, 3});

    CHECK_THROWS_AS(tape.scatter_sum(rows, {0, 0, 5}, 2), ValidationError);
    CHECK_THROWS_AS(tape.scatter_sum(rows, {0, 0}, 2), ValidationError);
}

TEST_CASE("scatter_sum gradient matches finite differences") {
    Rng rng(37);
    auto v0 = randvec(rng, 12); // 6x2
    std::vector<int> index = {0, 2, 1, 2, 0, 1};
    auto w = randvec(rng, 6);

    auto run = [&](const std::vector<double>& v, Tape& tape, Tensor* tv) {
        *tv = tape.leaf(6, 2, v, true);
        Tensor s = tape.scatter_sum(*tv, index, 3);
        Tensor weights = tape.constant(2, 1, {w[0], w[1]});
        return tape.mean_all(tape.matmul(s, weights));
    };
    Tape tape;
    Tensor tv;
    Tensor loss = run(v0, tape, &tv);
    tape.backward(loss);
    auto f = [&](const std::vector<double>& v) {
        Tape t2;
        Tensor x;
        return run(v, t2, &x).scalar();
    };
    CHECK(max_grad_rel_err(f, v0, tv.grad()) < 1e-4);
}

TEST_CASE("relu, dropout eval identity, mape basics") {
    Tape tape;
    Tensor x = tape.constant(1, 2, {-1, 2});
    CHECK(tape.relu(x).value() == std::vector<double>{0, 2});

    Tensor p = tape.constant(1, 1, {110});
    Tensor t = tape.constant(1, 1, {100});
    CHECK(tape.mape_loss(p, t).scalar() == doctest::Approx(0.10));

    Tensor zero_truth = tape.constant(1, 1, {0.0});
    CHECK_THROWS_AS(tape.mape_loss(p, zero_truth), ValidationError);
}

TEST_CASE("dropout: train mode masks and rescales, seeds reproduce") {
    Rng rng1(99), rng2(99);
    Tape tape;
    Tensor x = tape.constant(1, 1000, std::vector<double>(1000, 1.0));
    Tensor d1 = tape.dropout(x, 0.2, rng1);
    Tensor d2 = tape.dropout(x, 0.2, rng2);
    CHECK(d1.value() == d2.value()); // same seed, same mask
    int kept = 0;
    for (double v : d1.value()) {
        CHECK((v == 0.0 || v == doctest::Approx(1.25)));
        kept += v != 0.0;
    }
    CHECK(kept > 700);
    CHECK(kept < 900);
}

TEST_CASE("composed graph end-to-end gradient (relu/concat/bias/dropout-free)") {
    Rng rng(41);
    auto a0 = randvec(rng, 8);  // 2x4
    auto b0 = randvec(rng, 4);  // bias 1x4
    auto run = [&](const std::vector<double>& a, const std::vector<double>& b, Tape& tape,
                   Tensor* ta, Tensor* tb) {
        *ta = tape.leaf(2, 4, a, true);
        *tb = tape.leaf(1, 4, b, true);
        Tensor biased = tape.add_bias(*ta, *tb);
        Tensor act = tape.relu(biased);
        Tensor both = tape.concat_cols(act, *ta); // 2x8
        Tensor truth = tape.constant(2, 8, std::vector<double>(16, 2.0));
        return tape.mape_loss(tape.add(both, both), truth);
    };
    Tape tape;
    Tensor ta, tb;
    Tensor loss = run(a0, b0, tape, &ta, &tb);
    tape.backward(loss);
    auto fa = [&](const std::vector<double>& a) {
        Tape t2;
        Tensor x, y;
        return run(a, b0, t2, &x, &y).scalar();
    };
    auto fb = [&](const std::vector<double>& b) {
        Tape t2;
        Tensor x, y;
        return run(a0, b, t2, &x, &y).scalar();
    };
    CHECK(max_grad_rel_err(fa, a0, ta.grad()) < 1e-4);
    CHECK(max_grad_rel_err(fb, b0, tb.grad()) < 1e-4);
}

TEST_CASE("adam: zero gradient leaves params unchanged") {
    std::vector<double> params = {1.5, -2.0};
    std::vector<double> grads = {0, 0};
    AdamState st;
    adam_step(params, grads, st, 0.001);
    CHECK(params == std::vector<double>{1.5, -2.0});
}

TEST_CASE("adam: first unit-gradient step moves by about lr") {
    std::vector<double> params = {1.0};
    AdamState st;
    adam_step(params, {1.0}, st, 0.001);
    // bias-corrected mhat/sqrt(vhat) = 1 on step one
    CHECK(params[0] == doctest::Approx(1.0 - 0.001).epsilon(1e-6));
}

TEST_CASE("adam converges on (x-3)^2 within 5000 steps") {
    std::vector<double> x = {0.0};
    AdamState st;
    for (int i = 0; i < 5000; ++i) {
        std::vector<double> g = {2 * (x[0] - 3.0)};
        adam_step(x, g, st, 0.02);
    }
    CHECK(std::abs(x[0] - 3.0) < 1e-3);
}

TEST_SUITE_END();
