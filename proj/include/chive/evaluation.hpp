#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "chive/corpus.hpp"
#include "chive/model.hpp"

namespace chive {

// How the decoder's conditioning embedding is obtained.
struct InferenceMode {
    enum class Kind { kEncoded, kZero, kRandom, kTransfer };
    Kind kind = Kind::kZero;
    std::uint64_t seed = 0;                   // random / encoded sampling noise
    const CorpusItem* reference = nullptr;    // transfer source

    static InferenceMode encoded(std::uint64_t seed = 0) { return {Kind::kEncoded, seed, nullptr}; }
    static InferenceMode zero() { return {Kind::kZero, 0, nullptr}; }
    static InferenceMode random(std::uint64_t seed) { return {Kind::kRandom, seed, nullptr}; }
    static InferenceMode transfer(const CorpusItem& reference, std::uint64_t seed = 0) {
        return {Kind::kTransfer, seed, &reference};
    }
};

struct MetricReport {
    double logf0_rmse = 0.0;
    double f0_abs_hz = 0.0;
    double c0_rmse = 0.0;
    double dur_rmse_frames = 0.0;
    double dur_abs_ms = 0.0;
    std::size_t utterances = 0;
};

// Pooled sufficient statistics, kept per utterance for the bootstrap.
struct UtteranceStats {
    double f0_sq = 0.0, f0_abs_hz = 0.0, c0_sq = 0.0;
    std::size_t frames = 0;
    double dur_sq = 0.0, dur_abs_frames = 0.0;
    std::size_t phones = 0;
};

struct EvalDetail {
    MetricReport report;
    std::vector<UtteranceStats> per_utterance;
};

struct SynthesisResult {
    ProsodicPrediction prediction;
    std::vector<double> embedding;
};

// Free-running synthesis. Encoded mode samples the posterior by
// reparameterization; zero uses the prior mean; random draws from the prior;
// transfer samples the reference's posterior and decodes the target tree.
SynthesisResult synthesize(const ProsodyModel& model, const UtteranceTree& tree,
                           const ProsodicTargets* targets, const InferenceMode& mode);

// Table-style protocol: teacher-forced decode for frame-aligned F0/c0
// metrics, durations scored from the raw predictions. Encoded mode skips
// sampling and conditions on the posterior mean directly.
EvalDetail evaluate_detailed(const ProsodyModel& model, const std::vector<CorpusItem>& corpus,
                             const std::vector<std::size_t>& indices, const InferenceMode& mode,
                             int jobs = 1);
MetricReport evaluate(const ProsodyModel& model, const std::vector<CorpusItem>& corpus,
                      const std::vector<std::size_t>& indices, const InferenceMode& mode,
                      int jobs = 1);

MetricReport report_from_stats(const std::vector<UtteranceStats>& stats);

struct OrderingReport {
    MetricReport encoded, zero, random;
    bool verdict = false;  // encoded < zero < random on log-F0 RMSE
    std::string verdict_text;  // "pass" | "not converged"
    double gap_encoded_zero = 0.0, gap_zero_random = 0.0;
    double se_encoded_zero = 0.0, se_zero_random = 0.0;  // bootstrap standard errors
    std::size_t bootstrap_resamples = 0;
};

OrderingReport ordering_report(const ProsodyModel& model, const std::vector<CorpusItem>& corpus,
                               const std::vector<std::size_t>& indices, std::uint64_t seed,
                               int jobs = 1, std::size_t bootstrap_resamples = 1000);

struct TransferReport {
    double pearson_r = 0.0;
    std::size_t pairs = 0;
};

// Conditions random eval targets on random references' posterior means and
// correlates the induced mean-pitch shift against the references' hidden
// pitch style. Needs the styles sidecar.
TransferReport transfer_correlation(const ProsodyModel& model,
                                    const std::vector<CorpusItem>& corpus,
                                    const std::vector<std::size_t>& indices, std::size_t n_pairs,
                                    std::uint64_t seed, int jobs = 1);

std::string report_to_json(const MetricReport& report);
std::string ordering_to_json(const OrderingReport& report);
std::string report_table(const std::vector<std::pair<std::string, MetricReport>>& rows);

}  // namespace chive
