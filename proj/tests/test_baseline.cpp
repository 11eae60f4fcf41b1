#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "chive/baseline.hpp"
#include "chive/rng.hpp"
#include "chive/training.hpp"
#include "test_util.hpp"

using namespace chive;
using chive_test::simple_tree;
using chive_test::simple_targets;
using chive_test::tiny_model_config;

namespace {

ModelConfig tiny_baseline_config() {
    ModelConfig config = tiny_model_config();
    config.features = FeatureDims{3, 2, 1, 4};  // matches simple_tree
    return config;
}

}  // namespace

TEST_CASE("the baseline encoder runs one step per frame and yields one posterior") {
    const ModelConfig config = tiny_baseline_config();
    BaselineModel model(config, 5);
    const UtteranceTree tree = simple_tree({{2}, {1}}, config.features, {3, 2, 4});
    const ProsodicTargets targets = simple_targets(tree);

    Tape tape;
    EncoderTrace trace;
    const TreeIndex index = positions(tree);
    const PosteriorNodes post = model.encode_graph(tape, tree, targets, index, &trace);
    CHECK(trace.frame_steps == 9);
    CHECK(trace.capture_count == 1);
    CHECK(tape.length(post.mu) == static_cast<std::uint32_t>(config.embedding_dim));
    CHECK(tape.length(post.log_var) == static_cast<std::uint32_t>(config.embedding_dim));
}

TEST_CASE("a zero-parameter baseline predicts the standard posterior") {
    const ModelConfig config = tiny_baseline_config();
    BaselineModel model(config);  // zero parameters
    const UtteranceTree tree = simple_tree({{1}}, config.features);
    const ProsodicTargets targets = simple_targets(tree);
    const GaussianPosterior post = model.encode_posterior(tree, targets);
    for (std::size_t d = 0; d < post.dim(); ++d) {
        CHECK(post.mu[d] == 0.0);
        CHECK(post.sigma(d) == 1.0);
    }
}

TEST_CASE("teacher-forced baseline output length matches the frame count") {
    const ModelConfig config = tiny_baseline_config();
    BaselineModel model(config, 6);
    const UtteranceTree tree = simple_tree({{2, 1}, {1}}, config.features);
    const TreeIndex index = positions(tree);
    const std::vector<int> durations = tree_durations(index);
    const int total = std::accumulate(durations.begin(), durations.end(), 0);

    const std::vector<double> zero(config.embedding_dim, 0.0);
    const ProsodicPrediction pred = model.decode(tree, zero, DurationMode::kTeacherForced);
    CHECK(pred.log_f0.size() == static_cast<std::size_t>(total));
    CHECK(pred.c0.size() == static_cast<std::size_t>(total));
    CHECK(pred.durations_realized == durations);
    CHECK(pred.durations_raw.size() == durations.size());
}

TEST_CASE("free-running baseline realizes the rounded first-frame readout") {
    const ModelConfig config = tiny_baseline_config();
    BaselineModel model(config, 7);
    const UtteranceTree tree = simple_tree({{2}, {1}}, config.features);
    const std::vector<double> zero(config.embedding_dim, 0.0);
    const ProsodicPrediction pred = model.decode(tree, zero, DurationMode::kFreeRunning);
    std::size_t total = 0;
    for (std::size_t p = 0; p < pred.durations_raw.size(); ++p) {
        CHECK(pred.durations_realized[p] == round_duration(pred.durations_raw[p]));
        total += static_cast<std::size_t>(pred.durations_realized[p]);
    }
    CHECK(pred.log_f0.size() == total);
}

TEST_CASE("the loss evaluates unchanged on baseline outputs") {
    const ModelConfig config = tiny_baseline_config();
    BaselineModel model(config, 8);
    const UtteranceTree tree = simple_tree({{1, 1}}, config.features);
    const ProsodicTargets targets = simple_targets(tree);
    const std::vector<double> zero(config.embedding_dim, 0.0);
    const ProsodicPrediction pred = model.decode(tree, zero, DurationMode::kTeacherForced);
    const GaussianPosterior post = model.encode_posterior(tree, targets);
    const LossBreakdown breakdown = loss(pred, targets, post, LossWeights{});
    CHECK(breakdown.total ==
          doctest::Approx(breakdown.duration_l2 + breakdown.f0c0_l2 + breakdown.kl));
    CHECK(breakdown.total >= 0.0);
}

TEST_CASE("the analytic parameter count matches the registered store") {
    for (ModelConfig config : {tiny_baseline_config()}) {
        for (int hidden : {4, 12, 32}) {
            config.baseline_hidden = hidden;
            BaselineModel model(config);
            CHECK(model.parameter_count() == baseline_param_count(config, hidden));
        }
    }
}

TEST_CASE("the matched baseline stays within ten percent of the reference budget") {
    // production dims: 256-dim latent, hidden 32, synthetic-corpus features
    ModelConfig config;
    config.features = FeatureDims{5, 2, 1, 20};
    ChiveModel reference(config);
    BaselineModel baseline(config);  // auto-matched width
    const double ratio = static_cast<double>(baseline.parameter_count()) /
                         static_cast<double>(reference.parameter_count());
    CHECK(ratio > 0.9);
    CHECK(ratio < 1.1);

    // the tiny test config should match well too
    const ModelConfig tiny = tiny_baseline_config();
    ChiveModel tiny_reference(tiny);
    BaselineModel tiny_baseline(tiny);
    const double tiny_ratio = static_cast<double>(tiny_baseline.parameter_count()) /
                              static_cast<double>(tiny_reference.parameter_count());
    CHECK(tiny_ratio > 0.9);
    CHECK(tiny_ratio < 1.1);
}
