#include "chive/training.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "chive/checkpoint.hpp"
#include "chive/errors.hpp"
#include "chive/evaluation.hpp"
#include "chive/gradcheck.hpp"
#include "chive/parallel.hpp"

namespace chive {

LossBreakdown loss(const ProsodicPrediction& pred, const ProsodicTargets& targets,
                   const GaussianPosterior& post, const LossWeights& weights) {
    if (pred.durations_raw.size() != targets.durations.size())
        throw ShapeError("loss: duration count mismatch (teacher forcing broken)");
    if (pred.log_f0.size() != targets.log_f0.size() || pred.c0.size() != targets.c0.size())
        throw ShapeError("loss: frame count mismatch (teacher forcing broken)");

    LossBreakdown out;
    double dur = 0.0;
    for (std::size_t p = 0; p < targets.durations.size(); ++p) {
        const double d = pred.durations_raw[p] - static_cast<double>(targets.durations[p]);
        dur += d * d;
    }
    double f0c0 = 0.0;
    for (std::size_t t = 0; t < targets.log_f0.size(); ++t) {
        const double df = pred.log_f0[t] - targets.log_f0[t];
        const double dc = pred.c0[t] - targets.c0[t];
        f0c0 += df * df + dc * dc;
    }
    out.duration_l2 = weights.lambda_duration * dur;
    out.f0c0_l2 = weights.lambda_f0c0 * f0c0;
    out.kl = weights.lambda_kl * kl_divergence(post);
    out.total = out.duration_l2 + out.f0c0_l2 + out.kl;
    return out;
}

LossNodes loss_graph(Tape& tape, const DecodeNodes& decode, const ProsodicTargets& targets,
                     const PosteriorNodes& post, const LossWeights& weights) {
    std::vector<double> dur_target(targets.durations.begin(), targets.durations.end());
    const NodeId dur_diff =
        tape.sub(decode.durations_raw, tape.leaf(std::span<const double>(dur_target)));
    const NodeId dur_raw_sum = tape.sum(tape.square(dur_diff));

    const NodeId f0_diff =
        tape.sub(decode.log_f0, tape.leaf(std::span<const double>(targets.log_f0)));
    const NodeId c0_diff = tape.sub(decode.c0, tape.leaf(std::span<const double>(targets.c0)));
    const NodeId f0c0_raw_sum =
        tape.add(tape.sum(tape.square(f0_diff)), tape.sum(tape.square(c0_diff)));

    LossNodes nodes;
    nodes.duration_l2 = tape.scale_shift(dur_raw_sum, weights.lambda_duration, 0.0);
    nodes.f0c0_l2 = tape.scale_shift(f0c0_raw_sum, weights.lambda_f0c0, 0.0);
    nodes.kl = tape.scale_shift(kl_node(tape, post), weights.lambda_kl, 0.0);
    nodes.total = tape.add(tape.add(nodes.duration_l2, nodes.f0c0_l2), nodes.kl);
    return nodes;
}

double kl_ramp(const LossWeights& weights, int step) {
    if (weights.kl_warmup_steps <= 0) return 1.0;
    if (step >= weights.kl_warmup_steps) return 1.0;
    return static_cast<double>(step) / static_cast<double>(weights.kl_warmup_steps);
}

Adam::Adam(std::size_t size, double lr, double beta1, double beta2, double epsilon)
    : m(size, 0.0), v(size, 0.0), lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void Adam::restore(std::vector<double> m_in, std::vector<double> v_in, std::uint64_t t) {
    if (m_in.size() != m.size() || v_in.size() != v.size())
        throw ShapeError("Adam::restore: moment size mismatch");
    m = std::move(m_in);
    v = std::move(v_in);
    t_ = t;
}

void Adam::step(std::span<double> values, std::span<const double> grads) {
    if (values.size() != m.size() || grads.size() != m.size())
        throw ShapeError("Adam::step: size mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < values.size(); ++i) {
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * grads[i];
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * grads[i] * grads[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        values[i] -= lr_ * mhat / (std::sqrt(vhat) + epsilon_);
    }
}

std::uint64_t noise_seed(std::uint64_t train_seed, int step, int slot) {
    return mix_seed(mix_seed(mix_seed(train_seed, 0x6e6f6973), static_cast<std::uint64_t>(step)),
                    static_cast<std::uint64_t>(slot));
}

std::vector<std::size_t> batch_for_step(const std::vector<std::size_t>& train_indices,
                                        std::uint64_t seed, int step, int batch_size) {
    const std::size_t n = train_indices.size();
    if (n == 0) throw ValidationError("batch_for_step: no training utterances");
    std::vector<std::size_t> batch(static_cast<std::size_t>(batch_size));
    std::size_t cached_epoch = static_cast<std::size_t>(-1);
    std::vector<std::size_t> perm;
    for (int k = 0; k < batch_size; ++k) {
        const std::size_t global = static_cast<std::size_t>(step) * batch_size + k;
        const std::size_t epoch = global / n;
        if (epoch != cached_epoch) {
            perm = train_indices;
            Rng rng(mix_seed(mix_seed(seed, 0x73687566), epoch));
            for (std::size_t i = perm.size(); i > 1; --i)
                std::swap(perm[i - 1],
                          perm[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
            cached_epoch = epoch;
        }
        batch[k] = perm[global % n];
    }
    return batch;
}

StepLog train_step(ProsodyModel& model, const std::vector<CorpusItem>& corpus,
                   std::span<const std::size_t> batch, Adam& adam, const TrainConfig& config,
                   int step) {
    const std::size_t total = model.params().total_size();
    const std::size_t slots = batch.size();

    LossWeights effective = config.weights;
    effective.lambda_kl *= kl_ramp(config.weights, step);

    std::vector<std::vector<double>> slot_grads(slots);
    std::vector<LossBreakdown> slot_losses(slots);

    parallel_for(slots, config.jobs, [&](std::size_t slot) {
        const CorpusItem& item = corpus[batch[slot]];
        const TreeIndex index = positions(item.tree);

        Tape tape;
        tape.reserve(1 << 15);
        const PosteriorNodes post = model.encode_graph(tape, item.tree, item.targets, index);
        Rng noise_rng(noise_seed(config.seed, step, static_cast<int>(slot)));
        std::vector<double> noise(static_cast<std::size_t>(model.config().embedding_dim));
        noise_rng.fill_normal(noise.data(), noise.size());
        const NodeId embedding =
            sample_node(tape, post, tape.leaf(std::span<const double>(noise)));
        const DecodeNodes decode = model.decode_graph(tape, item.tree, index, embedding,
                                                      DurationMode::kTeacherForced);
        const LossNodes losses = loss_graph(tape, decode, item.targets, post, effective);

        LossBreakdown breakdown;
        breakdown.total = tape.scalar(losses.total);
        breakdown.duration_l2 = tape.scalar(losses.duration_l2);
        breakdown.f0c0_l2 = tape.scalar(losses.f0c0_l2);
        breakdown.kl = tape.scalar(losses.kl);
        if (!std::isfinite(breakdown.total))
            throw NumericError("non-finite loss at step " + std::to_string(step) +
                               " on utterance " + item.tree.utterance_id +
                               " (duration_l2=" + std::to_string(breakdown.duration_l2) +
                               ", f0c0_l2=" + std::to_string(breakdown.f0c0_l2) +
                               ", kl=" + std::to_string(breakdown.kl) + ")");
        slot_losses[slot] = breakdown;

        tape.backward(losses.total);
        slot_grads[slot].assign(total, 0.0);
        tape.accumulate_param_grads(slot_grads[slot]);
    });

    // slot-ordered reduction keeps the update independent of scheduling
    std::vector<double> grad(total, 0.0);
    for (std::size_t slot = 0; slot < slots; ++slot)
        for (std::size_t i = 0; i < total; ++i) grad[i] += slot_grads[slot][i];
    const double scale = 1.0 / static_cast<double>(slots);
    for (double& g : grad) g *= scale;

    StepLog log;
    log.step = step;
    log.kl_scale = kl_ramp(config.weights, step);
    for (const LossBreakdown& b : slot_losses) {
        log.mean_loss.total += b.total * scale;
        log.mean_loss.duration_l2 += b.duration_l2 * scale;
        log.mean_loss.f0c0_l2 += b.f0c0_l2 * scale;
        log.mean_loss.kl += b.kl * scale;
    }

    double norm_sq = 0.0;
    for (double g : grad) norm_sq += g * g;
    log.grad_norm = std::sqrt(norm_sq);
    if (config.clip_norm > 0 && log.grad_norm > config.clip_norm) {
        const double clip = config.clip_norm / log.grad_norm;
        for (double& g : grad) g *= clip;
    }

    adam.step(model.params().flat(), grad);
    return log;
}

namespace {

nlohmann::json report_json(const MetricReport& r) {
    return nlohmann::json::parse(report_to_json(r));
}

void save_state(const std::string& path, const ProsodyModel& model, std::uint64_t step,
                const Adam* adam) {
    Checkpoint checkpoint;
    checkpoint.kind = model.kind();
    checkpoint.config = model.config();
    checkpoint.step = step;
    for (std::size_t i = 0; i < model.params().count(); ++i) {
        const ParamEntry& entry = model.params().entry(i);
        const std::size_t idx = checkpoint.params.add(entry.name, entry.rows, entry.cols);
        auto src = model.params().values(i);
        auto dst = checkpoint.params.values(idx);
        std::copy(src.begin(), src.end(), dst.begin());
    }
    if (adam) {
        checkpoint.adam_m = adam->m;
        checkpoint.adam_v = adam->v;
    }
    save_checkpoint(path, checkpoint);
}

}  // namespace

TrainResult train_loop(ProsodyModel& model, const std::vector<CorpusItem>& corpus,
                       const std::vector<std::size_t>& train_indices,
                       const std::vector<std::size_t>& eval_indices, const TrainConfig& config,
                       std::ostream* metrics, Adam* resume_adam, int start_step) {
    Adam local_adam(model.params().total_size(), config.learning_rate, config.beta1, config.beta2,
                    config.adam_epsilon);
    Adam& adam = resume_adam ? *resume_adam : local_adam;

    TrainResult result;
    std::vector<double> best_params;
    std::uint64_t best_step = 0;

    for (int step = start_step; step < config.max_steps; ++step) {
        const std::vector<std::size_t> batch =
            batch_for_step(train_indices, config.seed, step, config.batch_size);
        const StepLog log = train_step(model, corpus, batch, adam, config, step);

        nlohmann::json row;
        row["step"] = log.step;
        row["total"] = log.mean_loss.total;
        row["dur_l2"] = log.mean_loss.duration_l2;
        row["f0c0_l2"] = log.mean_loss.f0c0_l2;
        row["kl"] = log.mean_loss.kl;
        row["grad_norm"] = log.grad_norm;
        row["kl_scale"] = log.kl_scale;
        row["noise_seed"] = noise_seed(config.seed, step, 0);

        const bool last = step + 1 == config.max_steps;
        const bool eval_now =
            !eval_indices.empty() &&
            (last || (config.eval_interval > 0 && (step + 1) % config.eval_interval == 0));
        if (eval_now) {
            const MetricReport encoded = evaluate(model, corpus, eval_indices,
                                                  InferenceMode::encoded(), config.jobs);
            const MetricReport zero =
                evaluate(model, corpus, eval_indices, InferenceMode::zero(), config.jobs);
            const MetricReport random =
                evaluate(model, corpus, eval_indices,
                         InferenceMode::random(config.eval_random_seed), config.jobs);
            row["eval"] = {{"encoded", report_json(encoded)},
                           {"zero", report_json(zero)},
                           {"random", report_json(random)}};

            if (result.best_step < 0 || encoded.logf0_rmse < result.best_metric) {
                result.best_step = step + 1;
                result.best_metric = encoded.logf0_rmse;
                auto flat = model.params().flat();
                best_params.assign(flat.begin(), flat.end());
                best_step = static_cast<std::uint64_t>(step + 1);
            }
            if (!config.checkpoint_dir.empty() && config.save_series && !last)
                save_state(config.checkpoint_dir + "/ckpt-" + std::to_string(step + 1) + ".ckpt",
                           model, static_cast<std::uint64_t>(step + 1), nullptr);
        }
        if (metrics) *metrics << row.dump() << "\n";
    }

    if (!config.checkpoint_dir.empty()) {
        result.last_checkpoint = config.checkpoint_dir + "/last.ckpt";
        save_state(result.last_checkpoint, model, static_cast<std::uint64_t>(config.max_steps),
                   &adam);
        if (!best_params.empty()) {
            // materialize the best snapshot without disturbing the live model
            auto flat = model.params().flat();
            std::vector<double> current(flat.begin(), flat.end());
            std::copy(best_params.begin(), best_params.end(), flat.begin());
            result.best_checkpoint = config.checkpoint_dir + "/best.ckpt";
            save_state(result.best_checkpoint, model, best_step, nullptr);
            std::copy(current.begin(), current.end(), flat.begin());
        }
    }
    return result;
}

GradCheckResult check_objective_gradients(ProsodyModel& model, const CorpusItem& item,
                                          std::uint64_t seed, double epsilon, int samples) {
    std::vector<double> noise(static_cast<std::size_t>(model.config().embedding_dim));
    Rng noise_rng(mix_seed(seed, 0x6e6f6973));
    noise_rng.fill_normal(noise.data(), noise.size());
    const LossWeights weights;

    const auto build_raw = [&](Tape& tape) {
        const TreeIndex index = positions(item.tree);
        const PosteriorNodes post = model.encode_graph(tape, item.tree, item.targets, index);
        const NodeId s = sample_node(tape, post, tape.leaf(noise));
        const DecodeNodes decode =
            model.decode_graph(tape, item.tree, index, s, DurationMode::kTeacherForced);
        return loss_graph(tape, decode, item.targets, post, weights).total;
    };

    // Normalize the objective to magnitude ~1/16 so finite-difference
    // quantization (which scales with the loss ulp) stays well below the
    // relative-error floor on low-influence coordinates.
    double scale = 1.0;
    {
        Tape tape;
        const double value = tape.scalar(build_raw(tape));
        if (!std::isfinite(value)) throw NumericError("check_objective_gradients: non-finite loss");
        if (std::fabs(value) > 1e-12) scale = 0.0625 / std::fabs(value);
    }

    Rng rng(mix_seed(seed, 0x67636b));
    return grad_check(
        model.params(),
        [&](Tape& tape) { return tape.scale_shift(build_raw(tape), scale, 0.0); }, epsilon,
        samples, rng);
}

}  // namespace chive
