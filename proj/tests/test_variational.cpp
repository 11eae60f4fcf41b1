#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "chive/gradcheck.hpp"
#include "chive/rng.hpp"
#include "chive/variational.hpp"
#include "mc_oracle.hpp"

using namespace chive;

namespace {

GaussianPosterior random_posterior(std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    GaussianPosterior post;
    post.mu.resize(dim);
    post.log_var.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        post.mu[d] = rng.uniform(-2.0, 2.0);
        post.log_var[d] = rng.uniform(-2.0, 1.0);
    }
    return post;
}

}  // namespace

TEST_CASE("projection with zero parameters gives the standard posterior") {
    ParameterStore store;
    const VariationalRef ref = add_variational(store, "var", 6, 16);
    Tape tape;
    const NodeId summary = tape.leaf(std::vector<double>(6, 0.7));
    const PosteriorNodes nodes = project(tape, store, ref, summary);
    CHECK(tape.length(nodes.mu) == 16);
    CHECK(tape.length(nodes.log_var) == 16);
    const GaussianPosterior post = posterior_values(tape, nodes);
    for (std::size_t d = 0; d < 16; ++d) {
        CHECK(post.mu[d] == 0.0);
        CHECK(post.sigma(d) == 1.0);
    }
}

TEST_CASE("projection output is 2x the latent width and linear with zero bias") {
    ParameterStore store;
    const VariationalRef ref = add_variational(store, "var", 4, 8);
    Rng rng(3);
    init_variational(store, ref, rng);  // bias stays zero

    std::vector<double> summary{0.2, -0.4, 0.8, 0.1};
    Tape tape;
    const PosteriorNodes nodes = project(tape, store, ref, tape.leaf(summary));
    CHECK(tape.length(nodes.mu) + tape.length(nodes.log_var) == 2 * 8);

    std::vector<double> doubled(summary);
    for (double& v : doubled) v *= 2.0;
    Tape tape2;
    const PosteriorNodes nodes2 = project(tape2, store, ref, tape2.leaf(doubled));
    for (std::size_t d = 0; d < 8; ++d) {
        CHECK(tape2.value(nodes2.mu)[d] == doctest::Approx(2.0 * tape.value(nodes.mu)[d]));
        CHECK(tape2.value(nodes2.log_var)[d] ==
              doctest::Approx(2.0 * tape.value(nodes.log_var)[d]));
    }
}

TEST_CASE("sampling collapses to the mean when the variance vanishes") {
    GaussianPosterior post;
    post.mu = {0.5, -1.5, 2.0};
    post.log_var = {-60.0, -60.0, -60.0};
    Rng rng(4);
    std::vector<double> noise(3);
    rng.fill_normal(noise.data(), 3);
    const std::vector<double> s = sample(post, noise);
    for (std::size_t d = 0; d < 3; ++d) CHECK(std::fabs(s[d] - post.mu[d]) < 1e-12);
}

TEST_CASE("zero noise returns the mean exactly") {
    const GaussianPosterior post = random_posterior(16, 8);
    const std::vector<double> zero(16, 0.0);
    CHECK(sample(post, zero) == post.mu);
}

TEST_CASE("sample is linear in the noise for a fixed posterior") {
    const GaussianPosterior post = random_posterior(8, 12);
    Rng rng(5);
    std::vector<double> n1(8), n2(8);
    rng.fill_normal(n1.data(), 8);
    rng.fill_normal(n2.data(), 8);
    const auto s1 = sample(post, n1);
    const auto s2 = sample(post, n2);
    std::vector<double> mixed(8);
    for (std::size_t d = 0; d < 8; ++d) mixed[d] = 0.25 * n1[d] + 0.75 * n2[d];
    const auto sm = sample(post, mixed);
    for (std::size_t d = 0; d < 8; ++d) {
        const double expected = post.mu[d] + 0.25 * (s1[d] - post.mu[d]) + 0.75 * (s2[d] - post.mu[d]);
        CHECK(sm[d] == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("empirical mean of reparameterized draws stays near mu") {
    const std::size_t dim = 16;
    const GaussianPosterior post = random_posterior(dim, 21);
    const std::size_t n = 100000;
    std::vector<double> mean(dim, 0.0);
    Rng rng(22);
    std::vector<double> noise(dim);
    for (std::size_t s = 0; s < n; ++s) {
        rng.fill_normal(noise.data(), dim);
        const auto draw = sample(post, noise);
        for (std::size_t d = 0; d < dim; ++d) mean[d] += draw[d];
    }
    for (std::size_t d = 0; d < dim; ++d) {
        mean[d] /= static_cast<double>(n);
        const double bound = 4.0 * post.sigma(d) / std::sqrt(static_cast<double>(n));
        CHECK(std::fabs(mean[d] - post.mu[d]) < bound);
    }
}

TEST_CASE("KL closed form on known points") {
    GaussianPosterior standard;
    standard.mu = {0.0};
    standard.log_var = {0.0};
    CHECK(kl_divergence(standard) == doctest::Approx(0.0));

    GaussianPosterior shifted;
    shifted.mu = {1.0};
    shifted.log_var = {0.0};  // sigma = 1
    CHECK(kl_divergence(shifted) == doctest::Approx(0.5));
}

TEST_CASE("KL is non-negative and zero only at the prior") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const GaussianPosterior post = random_posterior(8, seed);
        CHECK(kl_divergence(post) >= 0.0);
    }
    GaussianPosterior prior;
    prior.mu.assign(8, 0.0);
    prior.log_var.assign(8, 0.0);
    CHECK(kl_divergence(prior) < 1e-12);

    GaussianPosterior nudged = prior;
    nudged.mu[3] = 1e-3;
    CHECK(kl_divergence(nudged) > 0.0);
}

TEST_CASE("the two Monte-Carlo estimators agree on the same draw stream") {
    const GaussianPosterior post = random_posterior(8, 33);
    Rng r1(55), r2(55);
    const double naive = chive_test::naive_mc_kl(post, 5000, r1);
    const double fast = chive_test::fast_mc_kl(post, 5000, r2);
    CHECK(naive == doctest::Approx(fast).epsilon(1e-10));
}

TEST_CASE("closed-form KL matches the Monte-Carlo oracle within 1 percent") {
    for (std::uint64_t seed = 100; seed < 104; ++seed) {
        const GaussianPosterior post = random_posterior(32, seed);
        Rng rng(seed * 7 + 1);
        const double mc = chive_test::fast_mc_kl(post, 200000, rng);
        const double exact = kl_divergence(post);
        CHECK(std::fabs(mc - exact) / std::fabs(exact) < 0.01);
    }
}

TEST_CASE("KL gradient matches finite differences") {
    ParameterStore store;
    const std::size_t mu = store.add("mu", 12);
    const std::size_t lv = store.add("lv", 12);
    Rng init(2);
    for (double& v : store.values(mu)) v = init.uniform(-1.5, 1.5);
    for (double& v : store.values(lv)) v = init.uniform(-1.0, 1.0);

    Rng rng(6);
    const auto result = grad_check(
        store,
        [&](Tape& tape) {
            PosteriorNodes post;
            post.mu = tape.param(store, mu);
            post.log_var = tape.param(store, lv);
            return kl_node(tape, post);
        },
        1e-6, 48, rng);
    CHECK(result.max_rel_error < 1e-7);
}

TEST_CASE("graph-level sampling differentiates through mu and log_var") {
    ParameterStore store;
    const std::size_t mu = store.add("mu", 6);
    const std::size_t lv = store.add("lv", 6);
    Rng init(14);
    for (double& v : store.flat()) v = init.uniform(-1.0, 1.0);
    std::vector<double> noise(6);
    init.fill_normal(noise.data(), 6);

    Rng rng(15);
    const auto result = grad_check(
        store,
        [&](Tape& tape) {
            PosteriorNodes post;
            post.mu = tape.param(store, mu);
            post.log_var = tape.param(store, lv);
            const NodeId s = sample_node(tape, post, tape.leaf(noise));
            return tape.sum(tape.square(s));
        },
        1e-5, 36, rng);
    CHECK(result.max_rel_error < 1e-6);
}
