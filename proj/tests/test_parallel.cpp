#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "chive/evaluation.hpp"
#include "chive/parallel.hpp"
#include "chive/training.hpp"
#include "test_util.hpp"

using namespace chive;
using chive_test::tiny_corpus_config;
using chive_test::tiny_model_config;

// The jobs=1 path is the serial reference; the OpenMP path must produce
// bit-identical results because every task writes only its own slot and all
// reductions run in index order.

TEST_CASE("corpus generation is identical serial and parallel") {
    CorpusConfig config = tiny_corpus_config();
    config.utterance_count = 64;
    const auto serial = generate(config, 5, 1);
    const auto parallel = generate(config, 5, 4);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serialize(serial[i].tree, &serial[i].targets) ==
              serialize(parallel[i].tree, &parallel[i].targets));
        CHECK(serial[i].style->z_offset == parallel[i].style->z_offset);
        CHECK(serial[i].style->z_range == parallel[i].style->z_range);
    }
}

TEST_CASE("a training step is identical serial and parallel") {
    const auto corpus = generate(tiny_corpus_config(), 6);
    const std::vector<std::size_t> batch{0, 1, 2, 3};

    auto run = [&](int jobs) {
        ChiveModel model(tiny_model_config(), 30);
        TrainConfig config;
        config.jobs = jobs;
        Adam adam(model.params().total_size(), config.learning_rate, config.beta1, config.beta2,
                  config.adam_epsilon);
        StepLog log = train_step(model, corpus, batch, adam, config, 0);
        auto flat = model.params().flat();
        return std::make_pair(log.mean_loss.total, std::vector<double>(flat.begin(), flat.end()));
    };

    const auto [loss_serial, params_serial] = run(1);
    const auto [loss_parallel, params_parallel] = run(4);
    CHECK(loss_serial == loss_parallel);
    REQUIRE(params_serial.size() == params_parallel.size());
    for (std::size_t i = 0; i < params_serial.size(); ++i)
        CHECK(params_serial[i] == params_parallel[i]);
}

TEST_CASE("evaluation reports are identical serial and parallel") {
    const auto corpus = generate(tiny_corpus_config(), 7);
    ChiveModel model(tiny_model_config(), 31);
    std::vector<std::size_t> idx(corpus.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    for (const InferenceMode& mode :
         {InferenceMode::encoded(), InferenceMode::zero(), InferenceMode::random(9)}) {
        const MetricReport serial = evaluate(model, corpus, idx, mode, 1);
        const MetricReport parallel = evaluate(model, corpus, idx, mode, 4);
        CHECK(serial.logf0_rmse == parallel.logf0_rmse);
        CHECK(serial.f0_abs_hz == parallel.f0_abs_hz);
        CHECK(serial.c0_rmse == parallel.c0_rmse);
        CHECK(serial.dur_rmse_frames == parallel.dur_rmse_frames);
        CHECK(serial.dur_abs_ms == parallel.dur_abs_ms);
    }
}

TEST_CASE("worker exceptions surface on the calling thread") {
    CHECK_THROWS_AS(parallel_for(8, 4,
                                 [](std::size_t i) {
                                     if (i == 5) throw ValidationError("boom");
                                 }),
                    ValidationError);
}
