#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "chive/baseline.hpp"
#include "chive/evaluation.hpp"
#include "chive/parallel.hpp"
#include "chive/training.hpp"

// Compares the serial reference path (jobs=1) against the OpenMP path on the
// three per-utterance kernels: corpus generation, batched gradients and
// evaluation. Both paths produce bit-identical results (asserted here); the
// timing table shows what the threads buy on this machine.

namespace {

using namespace chive;
using clock_type = std::chrono::steady_clock;

double ms_since(clock_type::time_point start) {
    return std::chrono::duration<double, std::milli>(clock_type::now() - start).count();
}

struct Row {
    std::string name;
    double serial_ms;
    double parallel_ms;
    bool identical;
};

void print_rows(const std::vector<Row>& rows, int jobs) {
    std::printf("%-24s %12s %12s %9s %10s\n", "kernel", "serial(ms)", "parallel(ms)", "speedup",
                "identical");
    for (const Row& row : rows)
        std::printf("%-24s %12.1f %12.1f %8.2fx %10s\n", row.name.c_str(), row.serial_ms,
                    row.parallel_ms, row.serial_ms / row.parallel_ms,
                    row.identical ? "yes" : "NO");
    std::printf("(parallel path ran with %d threads)\n", jobs);
}

}  // namespace

int main(int argc, char** argv) {
    bool quick = false;
    for (int i = 1; i < argc; ++i)
        if (std::string(argv[i]) == "--quick") quick = true;

    const int jobs = std::max(2, default_jobs());
    CorpusConfig corpus_config;
    corpus_config.utterance_count = quick ? 24 : 400;

    std::vector<Row> rows;

    // corpus generation
    std::vector<CorpusItem> corpus;
    {
        const auto t0 = clock_type::now();
        corpus = generate(corpus_config, 11, 1);
        const double serial = ms_since(t0);
        const auto t1 = clock_type::now();
        const auto parallel = generate(corpus_config, 11, jobs);
        const double par = ms_since(t1);
        bool identical = corpus.size() == parallel.size();
        for (std::size_t i = 0; identical && i < corpus.size(); ++i)
            identical = corpus[i].targets.log_f0 == parallel[i].targets.log_f0;
        rows.push_back({"corpus generation", serial, par, identical});
    }

    ModelConfig model_config;
    model_config.features = feature_dims(corpus.front().tree);
    if (quick) {
        model_config.embedding_dim = 16;
        model_config.frame_hidden = 8;
        model_config.phone_hidden = 8;
        model_config.syllable_hidden = 8;
        model_config.duration_hidden = 8;
    }

    // batched gradient step
    {
        const int steps = quick ? 2 : 5;
        std::vector<std::size_t> batch;
        for (std::size_t i = 0; i < 8; ++i) batch.push_back(i);
        TrainConfig train_config;
        train_config.batch_size = static_cast<int>(batch.size());

        auto run = [&](int run_jobs) {
            ChiveModel model(model_config, 3);
            Adam adam(model.params().total_size(), train_config.learning_rate,
                      train_config.beta1, train_config.beta2, train_config.adam_epsilon);
            TrainConfig config = train_config;
            config.jobs = run_jobs;
            const auto t0 = clock_type::now();
            for (int s = 0; s < steps; ++s) train_step(model, corpus, batch, adam, config, s);
            const double elapsed = ms_since(t0);
            auto flat = model.params().flat();
            return std::make_pair(elapsed, std::vector<double>(flat.begin(), flat.end()));
        };
        const auto [serial, params_serial] = run(1);
        const auto [par, params_parallel] = run(jobs);
        rows.push_back({"batched gradient step", serial, par, params_serial == params_parallel});
    }

    // evaluation
    {
        ChiveModel model(model_config, 4);
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < corpus.size(); ++i) idx.push_back(i);
        const auto t0 = clock_type::now();
        const MetricReport serial_report =
            evaluate(model, corpus, idx, InferenceMode::encoded(), 1);
        const double serial = ms_since(t0);
        const auto t1 = clock_type::now();
        const MetricReport parallel_report =
            evaluate(model, corpus, idx, InferenceMode::encoded(), jobs);
        const double par = ms_since(t1);
        rows.push_back({"evaluation", serial, par,
                        serial_report.logf0_rmse == parallel_report.logf0_rmse &&
                            serial_report.dur_rmse_frames == parallel_report.dur_rmse_frames});
    }

    print_rows(rows, jobs);
    for (const Row& row : rows)
        if (!row.identical) return 1;
    return 0;
}
