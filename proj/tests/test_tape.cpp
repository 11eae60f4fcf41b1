#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "chive/gradcheck.hpp"
#include "chive/lstm.hpp"
#include "chive/rng.hpp"
#include "chive/tape.hpp"

using namespace chive;

namespace {

void randomize(ParameterStore& store, std::uint64_t seed, double scale = 0.5) {
    Rng rng(seed);
    for (double& v : store.flat()) v = rng.uniform(-scale, scale);
}

}  // namespace

TEST_CASE("concat length is the sum of part lengths and backward scatters") {
    Tape tape;
    const std::vector<double> a{1.0, 2.0}, b{3.0, 4.0, 5.0};
    const NodeId na = tape.leaf(a), nb = tape.leaf(b);
    const NodeId cat = tape.concat(std::vector<NodeId>{na, nb});
    CHECK(tape.length(cat) == 5);
    CHECK(tape.value(cat)[2] == 3.0);

    const NodeId total = tape.sum(tape.mul(cat, cat));
    tape.backward(total);
    CHECK(tape.grad(na)[1] == doctest::Approx(4.0));  // d/dx x^2 = 2x
    CHECK(tape.grad(nb)[2] == doctest::Approx(10.0));
}

TEST_CASE("affine with identity weights and zero bias is the identity") {
    Tape tape;
    const std::vector<double> eye{1, 0, 0, 0, 1, 0, 0, 0, 1};
    const std::vector<double> zero{0, 0, 0}, x{0.3, -0.7, 2.0};
    const NodeId y = tape.affine(tape.leaf_matrix(3, 3, eye), tape.leaf(x), tape.leaf(zero));
    for (int i = 0; i < 3; ++i) CHECK(tape.value(y)[i] == doctest::Approx(x[i]));
}

TEST_CASE("gradient of sum is all ones") {
    Tape tape;
    const std::vector<double> x{1.0, -2.0, 0.5, 9.0};
    const NodeId nx = tape.leaf(x);
    tape.backward(tape.sum(nx));
    for (int i = 0; i < 4; ++i) CHECK(tape.grad(nx)[i] == 1.0);
}

TEST_CASE("shape mismatches throw") {
    Tape tape;
    const NodeId a = tape.leaf(std::vector<double>{1, 2});
    const NodeId b = tape.leaf(std::vector<double>{1, 2, 3});
    CHECK_THROWS_AS(tape.add(a, b), ShapeError);
    CHECK_THROWS_AS(tape.mul(a, b), ShapeError);
    const NodeId w = tape.leaf_matrix(2, 2, std::vector<double>{1, 0, 0, 1});
    CHECK_THROWS_AS(tape.matvec(w, b), ShapeError);
    CHECK_THROWS_AS(tape.slice(a, 1, 4), ShapeError);
}

TEST_CASE("cell step with zero parameters") {
    ParameterStore store;
    const LstmStack stack = add_lstm_stack(store, "cell", 3, 4, 1);

    SUBCASE("zero state stays zero") {
        Tape tape;
        StackState state = zero_state(tape, stack);
        const NodeId out = stack_step(tape, store, stack, state,
                                      tape.leaf(std::vector<double>{0.5, -1.0, 2.0}));
        for (double v : tape.value(out)) CHECK(v == 0.0);
        for (double v : tape.value(state.c[0])) CHECK(v == 0.0);
    }

    SUBCASE("unit cell state halves and squashes") {
        Tape tape;
        StackState state = zero_state(tape, stack);
        state.c[0] = tape.leaf(std::vector<double>(4, 1.0));
        const NodeId out = stack_step(tape, store, stack, state,
                                      tape.leaf(std::vector<double>{0.0, 0.0, 0.0}));
        // i=f=o=0.5, g=0: c' = 0.5, h' = 0.5*tanh(0.5)
        const double expected = 0.5 * std::tanh(0.5);
        for (double v : tape.value(state.c[0])) CHECK(v == doctest::Approx(0.5));
        for (double v : tape.value(out)) CHECK(v == doctest::Approx(expected));
    }
}

TEST_CASE("forward evaluation is deterministic for fixed inputs") {
    ParameterStore store;
    const LstmStack stack = add_lstm_stack(store, "s", 2, 8, 2);
    Rng init(123);
    init_lstm_stack(store, stack, init);

    auto run = [&]() {
        Tape tape;
        StackState state = zero_state(tape, stack);
        NodeId out = 0;
        for (int t = 0; t < 5; ++t)
            out = stack_step(tape, store, stack, state,
                             tape.leaf(std::vector<double>{0.1 * t, -0.2 * t}));
        auto v = tape.value(out);
        return std::vector<double>(v.begin(), v.end());
    };
    CHECK(run() == run());
}

TEST_CASE("quadratic loss gradient is exact to round-off") {
    ParameterStore store;
    const std::size_t w = store.add("w", 4, 3);
    randomize(store, 7);
    Rng rng(11);
    const auto result = grad_check(
        store, [&](Tape& tape) { return tape.sum(tape.square(tape.param(store, w))); }, 1e-5, 12,
        rng);
    CHECK(result.max_rel_error < 1e-9);
}

TEST_CASE("every primitive passes a finite-difference check") {
    ParameterStore store;
    const std::size_t w = store.add("w", 3, 4);
    const std::size_t b = store.add("b", 3);
    const std::size_t x = store.add("x", 4);
    randomize(store, 21);
    Rng rng(31);
    const auto result = grad_check(
        store,
        [&](Tape& tape) {
            const NodeId nw = tape.param(store, w);
            const NodeId nb = tape.param(store, b);
            const NodeId nx = tape.param(store, x);
            const NodeId y = tape.affine(nw, nx, nb);
            const NodeId t = tape.tanh(y);
            const NodeId s = tape.sigmoid(y);
            const NodeId e = tape.exp(tape.scale_shift(y, 0.3, -0.1));
            const NodeId m = tape.mul(t, s);
            const NodeId cat = tape.concat(std::vector<NodeId>{m, e, tape.sub(t, s)});
            const NodeId sl = tape.slice(cat, 2, 5);
            return tape.sum(tape.square(sl));
        },
        1e-6, 40, rng);
    CHECK(result.max_rel_error < 1e-7);
}

TEST_CASE("two-layer recurrent stack gradient matches central differences") {
    ParameterStore store;
    const LstmStack stack = add_lstm_stack(store, "s", 3, 8, 2);
    Rng init(5);
    init_lstm_stack(store, stack, init);

    std::vector<std::vector<double>> inputs;
    Rng in_rng(9);
    for (int t = 0; t < 5; ++t) {
        std::vector<double> v(3);
        for (double& e : v) e = in_rng.uniform(-1.0, 1.0);
        inputs.push_back(v);
    }

    auto build = [&](Tape& tape) {
        StackState state = zero_state(tape, stack);
        NodeId out = 0;
        for (const auto& v : inputs) out = stack_step(tape, store, stack, state, tape.leaf(v));
        return tape.sum(tape.square(out));
    };

    // coordinates with gradients near 1e-8 push central differences to their
    // round-off floor at step 1e-5; the tight bound needs the larger step
    Rng rng(17);
    CHECK(grad_check(store, build, 1e-5, 60, rng).max_rel_error < 1e-5);
    Rng rng2(18);
    CHECK(grad_check(store, build, 1e-4, 200, rng2).max_rel_error < 1e-6);
}

TEST_CASE("parameter leaves are cached per tape and gradients accumulate once") {
    ParameterStore store;
    const std::size_t w = store.add("w", 3);
    randomize(store, 3);
    Tape tape;
    const NodeId a = tape.param(store, w);
    const NodeId b = tape.param(store, w);
    CHECK(a == b);
    tape.backward(tape.sum(tape.add(a, b)));
    std::vector<double> grads(store.total_size(), 0.0);
    tape.accumulate_param_grads(grads);
    for (double g : grads) CHECK(g == doctest::Approx(2.0));
}
