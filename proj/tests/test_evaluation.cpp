#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "chive/evaluation.hpp"
#include "chive/rng.hpp"
#include "test_util.hpp"

using namespace chive;
using chive_test::tiny_corpus_config;
using chive_test::tiny_model_config;

namespace {

// Oracle model for metric arithmetic: reproduces the targets exactly, with
// optional fixed offsets, and exposes the hidden style through the posterior
// mean so transfer becomes perfectly predictable.
class OracleModel final : public ProsodyModel {
public:
    OracleModel(const std::vector<CorpusItem>& corpus, int embedding_dim)
        : corpus_(corpus) {
        config_.embedding_dim = embedding_dim;
    }

    double logf0_offset = 0.0;
    double duration_offset = 0.0;
    double pitch_gain = 0.0;  // adds gain * embedding[0] to every frame

    const std::string& kind() const override { return kind_; }
    const ModelConfig& config() const override { return config_; }
    ParameterStore& params() override { return params_; }
    const ParameterStore& params() const override { return params_; }

    PosteriorNodes encode_graph(Tape& tape, const UtteranceTree& tree, const ProsodicTargets&,
                                const TreeIndex&, EncoderTrace*) const override {
        std::vector<double> mu(static_cast<std::size_t>(config_.embedding_dim), 0.0);
        mu[0] = find(tree).style->z_offset;
        PosteriorNodes post;
        post.mu = tape.leaf(mu);
        post.log_var = tape.leaf(std::vector<double>(mu.size(), -60.0));
        return post;
    }

    DecodeNodes decode_graph(Tape& tape, const UtteranceTree& tree, const TreeIndex&,
                             NodeId embedding, DurationMode mode,
                             DecodeTrace*) const override {
        const CorpusItem& item = find(tree);
        const double shift = logf0_offset + pitch_gain * tape.value(embedding)[0];
        DecodeNodes nodes;
        std::vector<double> durations;
        for (int d : item.targets.durations)
            durations.push_back(static_cast<double>(d) + duration_offset);
        std::vector<double> f0 = item.targets.log_f0;
        for (double& v : f0) v += shift;
        nodes.durations_raw = tape.leaf(durations);
        nodes.log_f0 = tape.leaf(f0);
        nodes.c0 = tape.leaf(item.targets.c0);
        nodes.durations_realized = item.targets.durations;
        (void)mode;
        return nodes;
    }

private:
    const CorpusItem& find(const UtteranceTree& tree) const {
        for (const CorpusItem& item : corpus_)
            if (item.tree.utterance_id == tree.utterance_id) return item;
        throw ValidationError("oracle model: unknown utterance " + tree.utterance_id);
    }

    std::string kind_ = "oracle";
    ModelConfig config_;
    ParameterStore params_;
    const std::vector<CorpusItem>& corpus_;
};

std::vector<std::size_t> all_indices(const std::vector<CorpusItem>& corpus) {
    std::vector<std::size_t> idx(corpus.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return idx;
}

}  // namespace

TEST_CASE("a perfect prediction scores zero on every metric") {
    const auto corpus = generate(tiny_corpus_config(), 5);
    OracleModel model(corpus, 8);
    const MetricReport report =
        evaluate(model, corpus, all_indices(corpus), InferenceMode::zero());
    CHECK(report.logf0_rmse == 0.0);
    CHECK(report.f0_abs_hz == 0.0);
    CHECK(report.c0_rmse == 0.0);
    CHECK(report.dur_rmse_frames == 0.0);
    CHECK(report.dur_abs_ms == 0.0);
    CHECK(report.utterances == corpus.size());
}

TEST_CASE("a uniform 0.1 log-F0 offset appears as exactly 0.1 RMSE") {
    const auto corpus = generate(tiny_corpus_config(), 6);
    OracleModel model(corpus, 8);
    model.logf0_offset = 0.1;
    const MetricReport report =
        evaluate(model, corpus, all_indices(corpus), InferenceMode::zero());
    CHECK(report.logf0_rmse == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(report.c0_rmse == 0.0);
    CHECK(report.f0_abs_hz > 0.0);
}

TEST_CASE("one frame of duration error per phone is five milliseconds") {
    const auto corpus = generate(tiny_corpus_config(), 7);
    OracleModel model(corpus, 8);
    model.duration_offset = 1.0;
    const MetricReport report =
        evaluate(model, corpus, all_indices(corpus), InferenceMode::zero());
    CHECK(report.dur_abs_ms == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(report.dur_rmse_frames == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero-mode synthesis is deterministic and random mode is seed-driven") {
    const auto corpus = generate(tiny_corpus_config(), 8);
    ChiveModel model(tiny_model_config(), 15);
    const CorpusItem& item = corpus[0];

    const SynthesisResult z1 = synthesize(model, item.tree, &item.targets, InferenceMode::zero());
    const SynthesisResult z2 = synthesize(model, item.tree, &item.targets, InferenceMode::zero());
    CHECK(z1.prediction.log_f0 == z2.prediction.log_f0);
    CHECK(z1.embedding == std::vector<double>(8, 0.0));

    const SynthesisResult r1 =
        synthesize(model, item.tree, &item.targets, InferenceMode::random(5));
    const SynthesisResult r2 =
        synthesize(model, item.tree, &item.targets, InferenceMode::random(5));
    const SynthesisResult r3 =
        synthesize(model, item.tree, &item.targets, InferenceMode::random(6));
    CHECK(r1.prediction.log_f0 == r2.prediction.log_f0);
    CHECK(r1.prediction.log_f0 != r3.prediction.log_f0);
}

TEST_CASE("transferring an utterance onto itself equals encoded mode under the same noise") {
    const auto corpus = generate(tiny_corpus_config(), 9);
    ChiveModel model(tiny_model_config(), 16);
    const CorpusItem& item = corpus[1];

    const SynthesisResult encoded =
        synthesize(model, item.tree, &item.targets, InferenceMode::encoded(21));
    const SynthesisResult transferred =
        synthesize(model, item.tree, &item.targets, InferenceMode::transfer(item, 21));
    CHECK(encoded.embedding == transferred.embedding);
    CHECK(encoded.prediction.log_f0 == transferred.prediction.log_f0);
}

TEST_CASE("encoded evaluation requires targets and empty splits are rejected") {
    const auto corpus = generate(tiny_corpus_config(), 10);
    ChiveModel model(tiny_model_config(), 17);
    CHECK_THROWS_AS(evaluate(model, corpus, {}, InferenceMode::zero()), ValidationError);
    const UtteranceTree& tree = corpus[0].tree;
    CHECK_THROWS_AS(synthesize(model, tree, nullptr, InferenceMode::encoded()), ValidationError);
}

TEST_CASE("an untrained model yields a not-converged ordering verdict without erroring") {
    const auto corpus = generate(tiny_corpus_config(), 11);
    ChiveModel model(tiny_model_config(), 18);
    const OrderingReport report =
        ordering_report(model, corpus, all_indices(corpus), 3, 1, 200);
    CHECK((report.verdict_text == "pass" || report.verdict_text == "not converged"));
    CHECK(report.encoded.utterances == corpus.size());
    CHECK(report.se_encoded_zero >= 0.0);
    const std::string json = ordering_to_json(report);
    CHECK(json.find("verdict") != std::string::npos);
}

TEST_CASE("evaluation is a pure function of its inputs") {
    const auto corpus = generate(tiny_corpus_config(), 12);
    ChiveModel model(tiny_model_config(), 19);
    const auto idx = all_indices(corpus);
    const MetricReport a = evaluate(model, corpus, idx, InferenceMode::random(4));
    const MetricReport b = evaluate(model, corpus, idx, InferenceMode::random(4));
    CHECK(a.logf0_rmse == b.logf0_rmse);
    CHECK(a.dur_rmse_frames == b.dur_rmse_frames);
}

TEST_CASE("a perfect-oracle decoder gives transfer correlation 1") {
    CorpusConfig config = tiny_corpus_config();
    config.utterance_count = 24;
    const auto corpus = generate(config, 13);
    OracleModel model(corpus, 8);
    model.pitch_gain = 0.3;  // decoded pitch shifts by 0.3 * embedded style
    const TransferReport report =
        transfer_correlation(model, corpus, all_indices(corpus), 60, 5);
    CHECK(report.pearson_r == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(report.pairs == 60);
}

TEST_CASE("transfer correlation needs the styles sidecar") {
    auto corpus = generate(tiny_corpus_config(), 14);
    for (CorpusItem& item : corpus) item.style.reset();
    ChiveModel model(tiny_model_config(), 20);
    CHECK_THROWS_AS(transfer_correlation(model, corpus, all_indices(corpus), 10, 1),
                    ValidationError);
}

TEST_CASE("reports render to JSON and a table") {
    MetricReport report;
    report.logf0_rmse = 0.077;
    report.f0_abs_hz = 8.478;
    report.c0_rmse = 0.287;
    report.dur_rmse_frames = 0.356;
    report.dur_abs_ms = 0.019;
    report.utterances = 100;
    const std::string json = report_to_json(report);
    CHECK(json.find("\"logf0_rmse\":0.077") != std::string::npos);
    const std::string table = report_table({{"encoded", report}});
    CHECK(table.find("logF0 RMSE") != std::string::npos);
    CHECK(table.find("0.0770") != std::string::npos);
}
