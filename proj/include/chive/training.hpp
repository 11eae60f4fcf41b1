#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "chive/corpus.hpp"
#include "chive/model.hpp"
#include "chive/variational.hpp"

namespace chive {

struct LossWeights {
    double lambda_duration = 1.0;
    double lambda_f0c0 = 1.0;
    double lambda_kl = 1.0;
    int kl_warmup_steps = 2000;  // effective KL weight ramps linearly from 0
};

struct TrainConfig {
    int batch_size = 4;
    double learning_rate = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, adam_epsilon = 1e-8;
    double clip_norm = 5.0;  // global gradient norm
    int max_steps = 6000;
    int eval_interval = 500;
    std::uint64_t seed = 1;
    LossWeights weights;
    int jobs = 1;
    std::string checkpoint_dir;       // empty = keep checkpoints in memory only
    bool save_series = true;          // ckpt-<step> at every eval interval
    std::size_t eval_random_seed = 99;
};

// Weighted components; total is exactly their sum.
struct LossBreakdown {
    double total = 0.0;
    double duration_l2 = 0.0;
    double f0c0_l2 = 0.0;
    double kl = 0.0;
};

// Sum-form objective: duration L2 over phones on the raw predictions,
// F0/c0 L2 over frames (teacher forced, one-to-one), KL against N(0, I).
LossBreakdown loss(const ProsodicPrediction& pred, const ProsodicTargets& targets,
                   const GaussianPosterior& post, const LossWeights& weights);

struct LossNodes {
    NodeId total = 0, duration_l2 = 0, f0c0_l2 = 0, kl = 0;
};

LossNodes loss_graph(Tape& tape, const DecodeNodes& decode, const ProsodicTargets& targets,
                     const PosteriorNodes& post, const LossWeights& weights);

double kl_ramp(const LossWeights& weights, int step);

class Adam {
public:
    Adam(std::size_t size, double lr, double beta1, double beta2, double epsilon);
    void step(std::span<double> values, std::span<const double> grads);
    std::uint64_t steps_taken() const { return t_; }

    std::vector<double> m, v;
    void restore(std::vector<double> m_in, std::vector<double> v_in, std::uint64_t t);

private:
    double lr_, beta1_, beta2_, epsilon_;
    std::uint64_t t_ = 0;
};

std::uint64_t noise_seed(std::uint64_t train_seed, int step, int slot);

struct StepLog {
    int step = 0;
    LossBreakdown mean_loss;  // averaged over the batch
    double grad_norm = 0.0;   // before clipping
    double kl_scale = 1.0;
};

// One optimizer update over a batch: per-utterance forward/backward (in
// parallel against the read-only snapshot), slot-ordered accumulation,
// average, clip, apply.
StepLog train_step(ProsodyModel& model, const std::vector<CorpusItem>& corpus,
                   std::span<const std::size_t> batch, Adam& adam, const TrainConfig& config,
                   int step);

// Deterministic batch for a step: epoch-wise shuffle of the sorted train
// indices, derived statelessly from (seed, step) so resume needs no state.
std::vector<std::size_t> batch_for_step(const std::vector<std::size_t>& train_indices,
                                        std::uint64_t seed, int step, int batch_size);

struct TrainResult {
    int best_step = -1;
    double best_metric = 0.0;  // eval encoded log-F0 RMSE
    std::string best_checkpoint;
    std::string last_checkpoint;
};

// Runs max_steps updates with periodic encoded/zero/random evaluation,
// appends one JSON object per event to the metrics stream, writes the
// checkpoint series and tracks the best checkpoint.
TrainResult train_loop(ProsodyModel& model, const std::vector<CorpusItem>& corpus,
                       const std::vector<std::size_t>& train_indices,
                       const std::vector<std::size_t>& eval_indices, const TrainConfig& config,
                       std::ostream* metrics, Adam* resume_adam = nullptr, int start_step = 0);

struct GradCheckResult;

// Finite-difference check of the whole objective on one utterance, with the
// loss normalized by its unperturbed value so the relative-error floor acts
// on a unit-scale objective regardless of tree size.
GradCheckResult check_objective_gradients(ProsodyModel& model, const CorpusItem& item,
                                          std::uint64_t seed, double epsilon, int samples);

}  // namespace chive
