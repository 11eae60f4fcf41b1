#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "chive/baseline.hpp"
#include "chive/checkpoint.hpp"
#include "chive/corpus.hpp"
#include "chive/evaluation.hpp"
#include "chive/gradcheck.hpp"
#include "chive/parallel.hpp"
#include "chive/training.hpp"

namespace {

using namespace chive;
using nlohmann::json;

constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;

void print_error(int code, const std::string& kind, const std::string& message) {
    json doc;
    doc["error"] = {{"code", code}, {"kind", kind}, {"message", message}};
    std::cerr << doc.dump() << std::endl;
}

double default_train_fraction() { return 2000.0 / 2200.0; }

struct SplitFlags {
    double train_fraction = default_train_fraction();
    std::uint64_t split_seed = 17;
    std::string split = "eval";
};

void add_split_flags(CLI::App* cmd, SplitFlags& flags) {
    cmd->add_option("--train-fraction", flags.train_fraction,
                    "train share of the corpus (default 2000/2200)");
    cmd->add_option("--split-seed", flags.split_seed, "seed of the train/eval split");
    cmd->add_option("--split", flags.split, "which side to use: train|eval|all")
        ->check(CLI::IsMember({"train", "eval", "all"}));
}

std::vector<std::size_t> resolve_split(const LoadedCorpus& corpus, const SplitFlags& flags) {
    if (flags.split == "all") {
        std::vector<std::size_t> idx(corpus.items.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        return idx;
    }
    auto [train, eval] = split_indices(corpus.items, flags.train_fraction, flags.split_seed);
    return flags.split == "train" ? train : eval;
}

ModelConfig model_config_for(const LoadedCorpus& corpus, int embedding_dim, int hidden,
                             int baseline_hidden) {
    if (corpus.items.empty()) throw ValidationError("corpus is empty");
    ModelConfig config;
    config.embedding_dim = embedding_dim;
    config.frame_hidden = hidden;
    config.phone_hidden = hidden;
    config.syllable_hidden = hidden;
    config.duration_hidden = hidden;
    config.baseline_hidden = baseline_hidden;
    config.features = feature_dims(corpus.items.front().tree);
    return config;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

void write_synthesis(const std::string& prefix, const SynthesisResult& result) {
    write_prediction_json(prefix + ".pred.json", result.prediction, &result.embedding);
    write_contour_csv(prefix + ".contour.csv", result.prediction);
    write_durations_csv(prefix + ".durations.csv", result.prediction);
    write_text(prefix + ".embedding.json", json(result.embedding).dump() + "\n");
}

int run_gen_corpus(const std::string& out_dir, CorpusConfig config, std::uint64_t seed,
                   int jobs) {
    const auto corpus = generate(config, seed, jobs);
    write_corpus(out_dir, corpus, config, seed);
    std::size_t frames = 0;
    for (const CorpusItem& item : corpus) frames += item.targets.frame_count();
    json summary;
    summary["utterances"] = corpus.size();
    summary["frames"] = frames;
    summary["directory"] = out_dir;
    std::cout << summary.dump() << std::endl;
    return 0;
}

struct TrainFlags {
    std::string corpus_dir, out_dir, model = "chive", resume;
    TrainConfig config;
    SplitFlags split;
    int embedding_dim = 256;
    int hidden = 32;
    int baseline_hidden = 0;
};

int run_train(const TrainFlags& flags) {
    namespace fs = std::filesystem;
    const LoadedCorpus corpus = load_corpus(flags.corpus_dir);
    auto [train_idx, eval_idx] =
        split_indices(corpus.items, flags.split.train_fraction, flags.split.split_seed);

    std::unique_ptr<ProsodyModel> model;
    std::unique_ptr<Adam> adam;
    int start_step = 0;
    if (!flags.resume.empty()) {
        const Checkpoint checkpoint = load_checkpoint(flags.resume);
        if (checkpoint.kind != flags.model)
            throw ValidationError("resume checkpoint is a " + checkpoint.kind +
                                  " model, requested " + flags.model);
        model = model_from_checkpoint(checkpoint);
        adam = std::make_unique<Adam>(model->params().total_size(), flags.config.learning_rate,
                                      flags.config.beta1, flags.config.beta2,
                                      flags.config.adam_epsilon);
        if (!checkpoint.adam_m.empty())
            adam->restore(checkpoint.adam_m, checkpoint.adam_v, checkpoint.step);
        start_step = static_cast<int>(checkpoint.step);
    } else {
        const ModelConfig config = model_config_for(corpus, flags.embedding_dim, flags.hidden,
                                                    flags.baseline_hidden);
        if (flags.model == kKindChive)
            model = std::make_unique<ChiveModel>(config, flags.config.seed);
        else
            model = std::make_unique<BaselineModel>(config, flags.config.seed);
        adam = std::make_unique<Adam>(model->params().total_size(), flags.config.learning_rate,
                                      flags.config.beta1, flags.config.beta2,
                                      flags.config.adam_epsilon);
    }

    std::error_code ec;
    fs::create_directories(flags.out_dir, ec);
    if (ec) throw IoError("cannot create " + flags.out_dir + ": " + ec.message());

    TrainConfig config = flags.config;
    config.checkpoint_dir = flags.out_dir;
    std::ofstream metrics(flags.out_dir + "/metrics.jsonl",
                          start_step > 0 ? std::ios::app : std::ios::trunc);
    if (!metrics) throw IoError("cannot write metrics log in " + flags.out_dir);

    const TrainResult result =
        train_loop(*model, corpus.items, train_idx, eval_idx, config, &metrics, adam.get(),
                   start_step);

    json summary;
    summary["model"] = flags.model;
    summary["steps"] = config.max_steps;
    summary["parameters"] = model->parameter_count();
    summary["best_step"] = result.best_step;
    summary["best_eval_logf0_rmse"] = result.best_metric;
    summary["last_checkpoint"] = result.last_checkpoint;
    summary["best_checkpoint"] = result.best_checkpoint;
    std::cout << summary.dump() << std::endl;
    return 0;
}

struct EvalFlags {
    std::string checkpoint, corpus_dir, mode = "ordering", format = "json", out;
    SplitFlags split;
    std::uint64_t seed = 1;
    int jobs = default_jobs();
    std::size_t pairs = 200;
    std::size_t bootstrap = 1000;
};

int run_eval(const EvalFlags& flags) {
    const LoadedCorpus corpus = load_corpus(flags.corpus_dir);
    const std::vector<std::size_t> indices = resolve_split(corpus, flags.split);
    const auto model = load_model(flags.checkpoint);

    std::string payload;
    if (flags.mode == "ordering") {
        const OrderingReport report =
            ordering_report(*model, corpus.items, indices, flags.seed, flags.jobs,
                            flags.bootstrap);
        if (flags.format == "table") {
            payload = report_table({{"encoded", report.encoded},
                                    {"zero", report.zero},
                                    {"random", report.random}});
            payload += "verdict: " + report.verdict_text + "\n";
        } else {
            payload = ordering_to_json(report) + "\n";
        }
    } else if (flags.mode == "transfer") {
        const TransferReport report =
            transfer_correlation(*model, corpus.items, indices, flags.pairs, flags.seed,
                                 flags.jobs);
        json doc;
        doc["pearson_r"] = report.pearson_r;
        doc["pairs"] = report.pairs;
        payload = doc.dump() + "\n";
    } else {
        InferenceMode mode = InferenceMode::zero();
        if (flags.mode == "encoded") mode = InferenceMode::encoded(flags.seed);
        if (flags.mode == "random") mode = InferenceMode::random(flags.seed);
        const MetricReport report = evaluate(*model, corpus.items, indices, mode, flags.jobs);
        payload = flags.format == "table" ? report_table({{flags.mode, report}})
                                          : report_to_json(report) + "\n";
    }

    if (flags.out.empty())
        std::cout << payload;
    else
        write_text(flags.out, payload);
    return 0;
}

struct SynthFlags {
    std::string checkpoint, input, mode = "zero", embedding_file, out_prefix;
    std::uint64_t seed = 1;
};

int run_synthesize(const SynthFlags& flags) {
    const auto model = load_model(flags.checkpoint);
    auto [tree, targets] = load_utterance(flags.input);
    const ValidationReport report = validate(tree, targets ? &*targets : nullptr);
    if (!report.ok()) throw ValidationError("invalid utterance: " + report.joined());

    SynthesisResult result;
    if (flags.mode == "embedding") {
        if (flags.embedding_file.empty())
            throw ValidationError("--mode embedding requires --embedding FILE");
        std::ifstream in(flags.embedding_file);
        if (!in) throw IoError("cannot open " + flags.embedding_file);
        json doc;
        try {
            in >> doc;
            result.embedding = doc.get<std::vector<double>>();
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad embedding file: ") + e.what());
        }
        result.prediction =
            model->decode(tree, result.embedding, DurationMode::kFreeRunning);
    } else {
        InferenceMode mode = InferenceMode::zero();
        if (flags.mode == "random") mode = InferenceMode::random(flags.seed);
        if (flags.mode == "encoded") mode = InferenceMode::encoded(flags.seed);
        result = synthesize(*model, tree, targets ? &*targets : nullptr, mode);
    }
    write_synthesis(flags.out_prefix, result);
    json summary;
    summary["frames"] = result.prediction.frame_count();
    summary["phones"] = result.prediction.durations_realized.size();
    summary["prefix"] = flags.out_prefix;
    std::cout << summary.dump() << std::endl;
    return 0;
}

struct TransferFlags {
    std::string checkpoint, reference, target, out_prefix;
    std::uint64_t seed = 1;
};

int run_transfer(const TransferFlags& flags) {
    const auto model = load_model(flags.checkpoint);
    auto [ref_tree, ref_targets] = load_utterance(flags.reference);
    if (!ref_targets)
        throw ValidationError("reference utterance must carry prosodic targets to encode");
    auto [tgt_tree, tgt_targets] = load_utterance(flags.target);
    (void)tgt_targets;

    CorpusItem reference;
    reference.tree = std::move(ref_tree);
    reference.targets = std::move(*ref_targets);
    const SynthesisResult result =
        synthesize(*model, tgt_tree, nullptr, InferenceMode::transfer(reference, flags.seed));
    write_synthesis(flags.out_prefix, result);
    json summary;
    summary["frames"] = result.prediction.frame_count();
    summary["prefix"] = flags.out_prefix;
    std::cout << summary.dump() << std::endl;
    return 0;
}

struct GradcheckFlags {
    std::uint64_t seed = 7;
    int trees = 20;
    int samples = 25;
    double epsilon = 1e-4;
    double threshold = 1e-5;
    std::string model = "both";
    int embedding_dim = 16;
    int hidden = 12;
};

int run_gradcheck(const GradcheckFlags& flags) {
    CorpusConfig corpus_config;
    corpus_config.utterance_count = static_cast<std::size_t>(flags.trees);
    corpus_config.min_words = 1;  // shapes span one-word to six-word trees
    corpus_config.max_words = 6;
    const auto corpus = generate(corpus_config, flags.seed);

    ModelConfig config;
    config.embedding_dim = flags.embedding_dim;
    config.frame_hidden = flags.hidden;
    config.phone_hidden = flags.hidden;
    config.syllable_hidden = flags.hidden;
    config.duration_hidden = flags.hidden;
    config.features = feature_dims(corpus.front().tree);

    json doc;
    double overall = 0.0;
    const auto check = [&](ProsodyModel& model) {
        double worst = 0.0;
        json detail;
        for (int i = 0; i < flags.trees; ++i) {
            const auto result = check_objective_gradients(
                model, corpus[static_cast<std::size_t>(i)],
                mix_seed(flags.seed, static_cast<std::uint64_t>(i)), flags.epsilon,
                flags.samples);
            if (result.max_rel_error > worst) {
                worst = result.max_rel_error;
                detail = {{"tree", i},
                          {"parameter", result.worst_param},
                          {"analytic", result.worst_analytic},
                          {"numeric", result.worst_numeric}};
            }
        }
        overall = std::max(overall, worst);
        json entry;
        entry["max_rel_error"] = worst;
        entry["trees"] = flags.trees;
        entry["samples_per_tree"] = flags.samples;
        entry["worst"] = detail;
        return entry;
    };

    if (flags.model == "chive" || flags.model == "both") {
        ChiveModel model(config, flags.seed);
        doc["chive"] = check(model);
    }
    if (flags.model == "baseline" || flags.model == "both") {
        BaselineModel model(config, flags.seed);
        doc["baseline"] = check(model);
    }
    doc["threshold"] = flags.threshold;
    doc["pass"] = overall < flags.threshold;
    std::cout << doc.dump(2) << std::endl;
    if (!(overall < flags.threshold))
        throw NumericError("gradient check failed: max relative error " +
                           std::to_string(overall));
    return 0;
}

struct ParamsFlags {
    std::string corpus_dir;
    int embedding_dim = 256;
    int hidden = 32;
    int baseline_hidden = 0;
};

int run_params(const ParamsFlags& flags) {
    ModelConfig config;
    config.embedding_dim = flags.embedding_dim;
    config.frame_hidden = flags.hidden;
    config.phone_hidden = flags.hidden;
    config.syllable_hidden = flags.hidden;
    config.duration_hidden = flags.hidden;
    config.baseline_hidden = flags.baseline_hidden;
    if (!flags.corpus_dir.empty()) {
        const LoadedCorpus corpus = load_corpus(flags.corpus_dir);
        config.features = feature_dims(corpus.items.front().tree);
    } else {
        CorpusConfig corpus_config;  // default synthetic corpus feature shape
        Rng rng(1);
        config.features = feature_dims(generate_structure(corpus_config, "probe", 0, rng));
    }

    ChiveModel chive_model(config);
    BaselineModel baseline_model(config);
    json doc;
    doc["features"] = {{"sentence", config.features.sentence},
                       {"word", config.features.word},
                       {"syllable", config.features.syllable},
                       {"phone", config.features.phone}};
    doc["chive"] = {{"parameters", chive_model.parameter_count()},
                    {"hidden", flags.hidden},
                    {"embedding_dim", flags.embedding_dim}};
    doc["baseline"] = {{"parameters", baseline_model.parameter_count()},
                       {"hidden", baseline_model.hidden()}};
    const double ratio = static_cast<double>(baseline_model.parameter_count()) /
                         static_cast<double>(chive_model.parameter_count());
    doc["ratio"] = ratio;
    doc["within_10_percent"] = ratio > 0.9 && ratio < 1.1;
    std::cout << doc.dump(2) << std::endl;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"clockwork hierarchical variational prosody model"};
    app.require_subcommand(1);
    app.set_config("--config", "", "flat key=value config file; flags win over file values");

    std::function<int()> action;

    // gen-corpus
    auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic corpus directory");
    {
        static std::string out_dir;
        static CorpusConfig config;
        static std::uint64_t seed = 1;
        static int jobs = default_jobs();
        gen->add_option("--out", out_dir, "corpus directory")->required();
        gen->add_option("--count", config.utterance_count, "number of utterances");
        gen->add_option("--seed", seed, "corpus seed");
        gen->add_option("--noise-scale", config.noise_scale, "acoustic noise std dev");
        gen->add_option("--min-words", config.min_words);
        gen->add_option("--max-words", config.max_words);
        gen->add_option("--min-syllables", config.min_syllables);
        gen->add_option("--max-syllables", config.max_syllables);
        gen->add_option("--min-phones", config.min_phones);
        gen->add_option("--max-phones", config.max_phones);
        gen->add_option("--min-duration", config.min_duration);
        gen->add_option("--max-duration", config.max_duration);
        gen->add_option("--speakers", config.speaker_count);
        gen->add_option("--phone-inventory", config.phone_inventory);
        gen->add_option("--jobs", jobs, "worker threads");
        gen->callback([&]() { action = [&]() { return run_gen_corpus(out_dir, config, seed, jobs); }; });
    }

    // train
    auto* train = app.add_subcommand("train", "train a model on a corpus");
    {
        static TrainFlags flags;
        flags.config.jobs = default_jobs();
        train->add_option("--corpus", flags.corpus_dir, "corpus directory")->required();
        train->add_option("--out", flags.out_dir, "run directory for checkpoints and metrics")
            ->required();
        train->add_option("--model", flags.model, "chive|baseline")
            ->check(CLI::IsMember({"chive", "baseline"}));
        train->add_option("--steps", flags.config.max_steps, "optimizer steps");
        train->add_option("--batch", flags.config.batch_size, "utterances per step");
        train->add_option("--lr", flags.config.learning_rate, "step size");
        train->add_option("--beta1", flags.config.beta1);
        train->add_option("--beta2", flags.config.beta2);
        train->add_option("--adam-eps", flags.config.adam_epsilon);
        train->add_option("--clip-norm", flags.config.clip_norm, "global gradient norm cap");
        train->add_option("--lambda-dur", flags.config.weights.lambda_duration);
        train->add_option("--lambda-f0c0", flags.config.weights.lambda_f0c0);
        train->add_option("--lambda-kl", flags.config.weights.lambda_kl);
        train->add_option("--kl-warmup", flags.config.weights.kl_warmup_steps,
                          "linear KL ramp length in steps");
        train->add_option("--eval-interval", flags.config.eval_interval);
        train->add_option("--seed", flags.config.seed, "training seed (init, batches, noise)");
        train->add_option("--jobs", flags.config.jobs);
        train->add_option("--embedding-dim", flags.embedding_dim);
        train->add_option("--hidden", flags.hidden, "hidden width of every stack");
        train->add_option("--baseline-hidden", flags.baseline_hidden,
                          "baseline width; 0 matches the chive budget");
        train->add_option("--resume", flags.resume, "checkpoint to continue from");
        train->add_flag("--no-save-series", [&](std::int64_t) { flags.config.save_series = false; },
                        "keep only best/last checkpoints");
        add_split_flags(train, flags.split);
        train->callback([&]() { action = [&]() { return run_train(flags); }; });
    }

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on a corpus split");
    {
        static EvalFlags flags;
        eval_cmd->add_option("--checkpoint", flags.checkpoint)->required();
        eval_cmd->add_option("--corpus", flags.corpus_dir)->required();
        eval_cmd->add_option("--mode", flags.mode,
                             "encoded|zero|random|ordering|transfer")
            ->check(CLI::IsMember({"encoded", "zero", "random", "ordering", "transfer"}));
        eval_cmd->add_option("--seed", flags.seed);
        eval_cmd->add_option("--jobs", flags.jobs);
        eval_cmd->add_option("--format", flags.format)->check(CLI::IsMember({"json", "table"}));
        eval_cmd->add_option("--out", flags.out, "write the report here instead of stdout");
        eval_cmd->add_option("--pairs", flags.pairs, "transfer-mode pair count");
        eval_cmd->add_option("--bootstrap", flags.bootstrap, "ordering-mode resamples");
        add_split_flags(eval_cmd, flags.split);
        eval_cmd->callback([&]() { action = [&]() { return run_eval(flags); }; });
    }

    // synthesize
    auto* synth = app.add_subcommand("synthesize", "decode prosody for one utterance");
    {
        static SynthFlags flags;
        synth->add_option("--checkpoint", flags.checkpoint)->required();
        synth->add_option("--input", flags.input, "utterance .utt.json")->required();
        synth->add_option("--mode", flags.mode, "zero|random|encoded|embedding")
            ->check(CLI::IsMember({"zero", "random", "encoded", "embedding"}));
        synth->add_option("--embedding", flags.embedding_file,
                          "JSON array file for --mode embedding");
        synth->add_option("--seed", flags.seed);
        synth->add_option("--out", flags.out_prefix, "output path prefix")->required();
        synth->callback([&]() { action = [&]() { return run_synthesize(flags); }; });
    }

    // transfer
    auto* transfer = app.add_subcommand("transfer",
                                        "decode a target with a reference's prosody embedding");
    {
        static TransferFlags flags;
        transfer->add_option("--checkpoint", flags.checkpoint)->required();
        transfer->add_option("--reference", flags.reference, "reference .utt.json with targets")
            ->required();
        transfer->add_option("--target", flags.target, "target .utt.json")->required();
        transfer->add_option("--seed", flags.seed);
        transfer->add_option("--out", flags.out_prefix, "output path prefix")->required();
        transfer->callback([&]() { action = [&]() { return run_transfer(flags); }; });
    }

    // gradcheck
    auto* gradcheck_cmd =
        app.add_subcommand("gradcheck", "finite-difference check of the training objective");
    {
        static GradcheckFlags flags;
        gradcheck_cmd->add_option("--seed", flags.seed);
        gradcheck_cmd->add_option("--trees", flags.trees, "random tree count (1-6 words each)");
        gradcheck_cmd->add_option("--samples", flags.samples, "coordinates per tree");
        gradcheck_cmd->add_option("--eps", flags.epsilon, "smallest step scale");
        gradcheck_cmd->add_option("--threshold", flags.threshold, "max relative error to pass");
        gradcheck_cmd->add_option("--model", flags.model)
            ->check(CLI::IsMember({"chive", "baseline", "both"}));
        gradcheck_cmd->add_option("--embedding-dim", flags.embedding_dim);
        gradcheck_cmd->add_option("--hidden", flags.hidden);
        gradcheck_cmd->callback([&]() { action = [&]() { return run_gradcheck(flags); }; });
    }

    // params
    auto* params_cmd = app.add_subcommand("params", "report model parameter budgets");
    {
        static ParamsFlags flags;
        static std::uint64_t seed = 1;
        params_cmd->add_option("--corpus", flags.corpus_dir,
                               "derive feature dims from this corpus");
        params_cmd->add_option("--embedding-dim", flags.embedding_dim);
        params_cmd->add_option("--hidden", flags.hidden);
        params_cmd->add_option("--baseline-hidden", flags.baseline_hidden);
        params_cmd->add_option("--seed", seed, "accepted for interface uniformity");
        params_cmd->callback([&]() { action = [&]() { return run_params(flags); }; });
    }

    try {
        app.parse(argc, argv);
        if (!action) throw CLI::CallForHelp();
        return action();
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error(kExitUsage, "usage", e.what());
        return kExitUsage;
    } catch (const NumericError& e) {
        print_error(kExitNumeric, "numeric", e.what());
        return kExitNumeric;
    } catch (const ValidationError& e) {
        print_error(kExitValidation, "validation", e.what());
        return kExitValidation;
    } catch (const IoError& e) {
        print_error(kExitValidation, "io", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        print_error(kExitValidation, "error", e.what());
        return kExitValidation;
    }
}
