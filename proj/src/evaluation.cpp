#include "chive/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "chive/errors.hpp"
#include "chive/parallel.hpp"
#include "chive/rng.hpp"
#include "chive/variational.hpp"

namespace chive {

namespace {

std::vector<double> embedding_for(const ProsodyModel& model, const UtteranceTree& tree,
                                  const ProsodicTargets* targets, const InferenceMode& mode,
                                  std::uint64_t stream) {
    const std::size_t dim = static_cast<std::size_t>(model.config().embedding_dim);
    switch (mode.kind) {
        case InferenceMode::Kind::kZero:
            return std::vector<double>(dim, 0.0);
        case InferenceMode::Kind::kRandom: {
            Rng rng(mix_seed(mode.seed, stream));
            std::vector<double> s(dim);
            rng.fill_normal(s.data(), dim);
            return s;
        }
        case InferenceMode::Kind::kEncoded: {
            if (!targets)
                throw ValidationError("encoded mode needs reference targets for encoding");
            const GaussianPosterior post = model.encode_posterior(tree, *targets);
            Rng rng(mix_seed(mode.seed, stream));
            std::vector<double> noise(dim);
            rng.fill_normal(noise.data(), dim);
            return sample(post, noise);
        }
        case InferenceMode::Kind::kTransfer: {
            if (!mode.reference)
                throw ValidationError("transfer mode needs a reference utterance");
            const GaussianPosterior post =
                model.encode_posterior(mode.reference->tree, mode.reference->targets);
            Rng rng(mix_seed(mode.seed, stream));
            std::vector<double> noise(dim);
            rng.fill_normal(noise.data(), dim);
            return sample(post, noise);
        }
    }
    throw ShapeError("unreachable inference mode");
}

double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

}  // namespace

SynthesisResult synthesize(const ProsodyModel& model, const UtteranceTree& tree,
                           const ProsodicTargets* targets, const InferenceMode& mode) {
    SynthesisResult result;
    result.embedding = embedding_for(model, tree, targets, mode, 0);
    result.prediction = model.decode(tree, result.embedding, DurationMode::kFreeRunning);
    return result;
}

EvalDetail evaluate_detailed(const ProsodyModel& model, const std::vector<CorpusItem>& corpus,
                             const std::vector<std::size_t>& indices, const InferenceMode& mode,
                             int jobs) {
    if (indices.empty()) throw ValidationError("evaluate: empty split");
    EvalDetail detail;
    detail.per_utterance.resize(indices.size());

    parallel_for(indices.size(), jobs, [&](std::size_t k) {
        const CorpusItem& item = corpus[indices[k]];
        std::vector<double> embedding;
        if (mode.kind == InferenceMode::Kind::kEncoded) {
            // Table protocol: sampling skipped, posterior mean fed directly
            embedding = model.encode_posterior(item.tree, item.targets).mu;
        } else {
            embedding = embedding_for(model, item.tree, &item.targets, mode, indices[k]);
        }
        const ProsodicPrediction pred =
            model.decode(item.tree, embedding, DurationMode::kTeacherForced);
        if (pred.log_f0.size() != item.targets.log_f0.size())
            throw ShapeError("evaluate: teacher-forced frame count mismatch");

        UtteranceStats& stats = detail.per_utterance[k];
        stats.frames = pred.log_f0.size();
        for (std::size_t t = 0; t < pred.log_f0.size(); ++t) {
            const double df = pred.log_f0[t] - item.targets.log_f0[t];
            const double dc = pred.c0[t] - item.targets.c0[t];
            stats.f0_sq += df * df;
            stats.c0_sq += dc * dc;
            stats.f0_abs_hz += std::fabs(std::exp(pred.log_f0[t]) - std::exp(item.targets.log_f0[t]));
        }
        stats.phones = pred.durations_raw.size();
        for (std::size_t p = 0; p < pred.durations_raw.size(); ++p) {
            const double dd = pred.durations_raw[p] - static_cast<double>(item.targets.durations[p]);
            stats.dur_sq += dd * dd;
            stats.dur_abs_frames += std::fabs(dd);
        }
    });

    detail.report = report_from_stats(detail.per_utterance);
    return detail;
}

MetricReport evaluate(const ProsodyModel& model, const std::vector<CorpusItem>& corpus,
                      const std::vector<std::size_t>& indices, const InferenceMode& mode,
                      int jobs) {
    return evaluate_detailed(model, corpus, indices, mode, jobs).report;
}

MetricReport report_from_stats(const std::vector<UtteranceStats>& stats) {
    double f0_sq = 0.0, f0_abs = 0.0, c0_sq = 0.0, dur_sq = 0.0, dur_abs = 0.0;
    std::size_t frames = 0, phones = 0;
    for (const UtteranceStats& s : stats) {
        f0_sq += s.f0_sq;
        f0_abs += s.f0_abs_hz;
        c0_sq += s.c0_sq;
        dur_sq += s.dur_sq;
        dur_abs += s.dur_abs_frames;
        frames += s.frames;
        phones += s.phones;
    }
    MetricReport report;
    report.utterances = stats.size();
    if (frames > 0) {
        report.logf0_rmse = std::sqrt(f0_sq / static_cast<double>(frames));
        report.f0_abs_hz = f0_abs / static_cast<double>(frames);
        report.c0_rmse = std::sqrt(c0_sq / static_cast<double>(frames));
    }
    if (phones > 0) {
        report.dur_rmse_frames = std::sqrt(dur_sq / static_cast<double>(phones));
        report.dur_abs_ms = kFrameShiftMs * dur_abs / static_cast<double>(phones);
    }
    return report;
}

namespace {

double pooled_logf0_rmse(const std::vector<UtteranceStats>& stats,
                         const std::vector<std::size_t>& pick) {
    double sq = 0.0;
    std::size_t frames = 0;
    for (std::size_t i : pick) {
        sq += stats[i].f0_sq;
        frames += stats[i].frames;
    }
    return frames ? std::sqrt(sq / static_cast<double>(frames)) : 0.0;
}

}  // namespace

OrderingReport ordering_report(const ProsodyModel& model, const std::vector<CorpusItem>& corpus,
                               const std::vector<std::size_t>& indices, std::uint64_t seed,
                               int jobs, std::size_t bootstrap_resamples) {
    const EvalDetail encoded =
        evaluate_detailed(model, corpus, indices, InferenceMode::encoded(seed), jobs);
    const EvalDetail zero = evaluate_detailed(model, corpus, indices, InferenceMode::zero(), jobs);
    const EvalDetail random =
        evaluate_detailed(model, corpus, indices, InferenceMode::random(seed), jobs);

    OrderingReport report;
    report.encoded = encoded.report;
    report.zero = zero.report;
    report.random = random.report;
    report.gap_encoded_zero = zero.report.logf0_rmse - encoded.report.logf0_rmse;
    report.gap_zero_random = random.report.logf0_rmse - zero.report.logf0_rmse;
    report.bootstrap_resamples = bootstrap_resamples;

    // bootstrap over eval utterances using the cached per-utterance stats
    const std::size_t n = indices.size();
    Rng rng(mix_seed(seed, 0xb007));
    double sum1 = 0.0, sum1_sq = 0.0, sum2 = 0.0, sum2_sq = 0.0;
    std::vector<std::size_t> pick(n);
    for (std::size_t b = 0; b < bootstrap_resamples; ++b) {
        for (std::size_t i = 0; i < n; ++i)
            pick[i] = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
        const double e = pooled_logf0_rmse(encoded.per_utterance, pick);
        const double z = pooled_logf0_rmse(zero.per_utterance, pick);
        const double r = pooled_logf0_rmse(random.per_utterance, pick);
        const double g1 = z - e, g2 = r - z;
        sum1 += g1;
        sum1_sq += g1 * g1;
        sum2 += g2;
        sum2_sq += g2 * g2;
    }
    if (bootstrap_resamples > 1) {
        const double nb = static_cast<double>(bootstrap_resamples);
        report.se_encoded_zero = std::sqrt(std::max(0.0, (sum1_sq - sum1 * sum1 / nb) / (nb - 1.0)));
        report.se_zero_random = std::sqrt(std::max(0.0, (sum2_sq - sum2 * sum2 / nb) / (nb - 1.0)));
    }

    report.verdict = report.encoded.logf0_rmse < report.zero.logf0_rmse &&
                     report.zero.logf0_rmse < report.random.logf0_rmse;
    report.verdict_text = report.verdict ? "pass" : "not converged";
    return report;
}

TransferReport transfer_correlation(const ProsodyModel& model,
                                    const std::vector<CorpusItem>& corpus,
                                    const std::vector<std::size_t>& indices, std::size_t n_pairs,
                                    std::uint64_t seed, int jobs) {
    if (indices.size() < 2) throw ValidationError("transfer_correlation: need at least 2 utterances");
    for (std::size_t i : indices)
        if (!corpus[i].style)
            throw ValidationError("transfer_correlation: styles sidecar missing for " +
                                  corpus[i].tree.utterance_id);

    // zero-embedding baseline mean pitch per target, computed once
    std::vector<double> zero_mean(indices.size());
    const std::size_t dim = static_cast<std::size_t>(model.config().embedding_dim);
    parallel_for(indices.size(), jobs, [&](std::size_t k) {
        const std::vector<double> zero(dim, 0.0);
        const ProsodicPrediction pred =
            model.decode(corpus[indices[k]].tree, zero, DurationMode::kFreeRunning);
        zero_mean[k] = mean_of(pred.log_f0);
    });

    struct Pair {
        std::size_t ref_k, tgt_k;
    };
    Rng pair_rng(mix_seed(seed, 0x70616972));
    std::vector<Pair> pairs(n_pairs);
    for (Pair& p : pairs) {
        p.ref_k = static_cast<std::size_t>(
            pair_rng.uniform_int(0, static_cast<std::int64_t>(indices.size()) - 1));
        do {
            p.tgt_k = static_cast<std::size_t>(
                pair_rng.uniform_int(0, static_cast<std::int64_t>(indices.size()) - 1));
        } while (p.tgt_k == p.ref_k);
    }

    // the transfer protocol conditions on the reference posterior mean
    std::vector<double> x(n_pairs), y(n_pairs);
    parallel_for(n_pairs, jobs, [&](std::size_t k) {
        const CorpusItem& ref = corpus[indices[pairs[k].ref_k]];
        const CorpusItem& tgt = corpus[indices[pairs[k].tgt_k]];
        const GaussianPosterior post = model.encode_posterior(ref.tree, ref.targets);
        const ProsodicPrediction pred =
            model.decode(tgt.tree, post.mu, DurationMode::kFreeRunning);
        x[k] = 0.3 * ref.style->z_offset;
        y[k] = mean_of(pred.log_f0) - zero_mean[pairs[k].tgt_k];
    });

    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < n_pairs; ++k) {
        mx += x[k];
        my += y[k];
    }
    mx /= static_cast<double>(n_pairs);
    my /= static_cast<double>(n_pairs);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < n_pairs; ++k) {
        sxy += (x[k] - mx) * (y[k] - my);
        sxx += (x[k] - mx) * (x[k] - mx);
        syy += (y[k] - my) * (y[k] - my);
    }
    TransferReport report;
    report.pairs = n_pairs;
    report.pearson_r = (sxx > 0 && syy > 0) ? sxy / std::sqrt(sxx * syy) : 0.0;
    return report;
}

std::string report_to_json(const MetricReport& report) {
    nlohmann::json doc;
    doc["logf0_rmse"] = report.logf0_rmse;
    doc["f0_abs_hz"] = report.f0_abs_hz;
    doc["c0_rmse"] = report.c0_rmse;
    doc["dur_rmse_frames"] = report.dur_rmse_frames;
    doc["dur_abs_ms"] = report.dur_abs_ms;
    doc["utterances"] = report.utterances;
    return doc.dump();
}

std::string ordering_to_json(const OrderingReport& report) {
    nlohmann::json doc;
    doc["encoded"] = nlohmann::json::parse(report_to_json(report.encoded));
    doc["zero"] = nlohmann::json::parse(report_to_json(report.zero));
    doc["random"] = nlohmann::json::parse(report_to_json(report.random));
    doc["verdict"] = report.verdict_text;
    doc["gap_encoded_zero"] = report.gap_encoded_zero;
    doc["gap_zero_random"] = report.gap_zero_random;
    doc["se_encoded_zero"] = report.se_encoded_zero;
    doc["se_zero_random"] = report.se_zero_random;
    doc["bootstrap_resamples"] = report.bootstrap_resamples;
    return doc.dump(2);
}

std::string report_table(const std::vector<std::pair<std::string, MetricReport>>& rows) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-14s %12s %12s %10s %14s %12s\n", "run", "logF0 RMSE",
                  "F0 Abs(Hz)", "c0 RMSE", "Dur RMSE(frm)", "Dur Abs(ms)");
    out << line;
    for (const auto& [name, r] : rows) {
        std::snprintf(line, sizeof(line), "%-14s %12.4f %12.3f %10.4f %14.4f %12.3f\n",
                      name.c_str(), r.logf0_rmse, r.f0_abs_hz, r.c0_rmse, r.dur_rmse_frames,
                      r.dur_abs_ms);
        out << line;
    }
    return out.str();
}

}  // namespace chive
