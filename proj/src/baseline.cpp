#include "chive/baseline.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "chive/errors.hpp"
#include "chive/rng.hpp"

namespace chive {

namespace {

constexpr int kFrameTiming = 3;
constexpr int kPhoneTiming = 4;
constexpr int kSyllableTiming = 4;
constexpr int kWordTiming = 64;
constexpr int kAllTiming = kWordTiming + kSyllableTiming + kPhoneTiming + kFrameTiming;

int feature_total(const FeatureDims& f) { return f.sentence + f.word + f.syllable + f.phone; }

// Broadcast linguistic features plus all four timing signals for one frame.
std::vector<double> frame_features(const UtteranceTree& tree, const TreeIndex& index,
                                   std::size_t p, int frame_in_phone, int frames_in_phone) {
    const std::size_t s = index.phone_syllable[p];
    const std::size_t w = index.syllable_word[s];
    std::vector<double> out;
    out.reserve(tree.sentence_features.size() + index.words[w]->features.size() +
                index.syllables[s]->features.size() + index.phones[p]->features.size() +
                kAllTiming);
    out.insert(out.end(), tree.sentence_features.begin(), tree.sentence_features.end());
    out.insert(out.end(), index.words[w]->features.begin(), index.words[w]->features.end());
    out.insert(out.end(), index.syllables[s]->features.begin(), index.syllables[s]->features.end());
    out.insert(out.end(), index.phones[p]->features.begin(), index.phones[p]->features.end());
    const std::size_t timing_at = out.size();
    out.resize(timing_at + kAllTiming);
    double* t = out.data() + timing_at;
    timing_signal_into(index.word_position[w], kWordTiming, t);
    timing_signal_into(index.syllable_position[s], kSyllableTiming, t + kWordTiming);
    timing_signal_into(index.phone_position[p], kPhoneTiming,
                       t + kWordTiming + kSyllableTiming);
    timing_signal_into(relative_position(static_cast<std::size_t>(frame_in_phone),
                                         static_cast<std::size_t>(frames_in_phone)),
                       kFrameTiming, t + kWordTiming + kSyllableTiming + kPhoneTiming);
    return out;
}

}  // namespace

std::size_t baseline_param_count(const ModelConfig& config, int hidden) {
    const std::size_t h = static_cast<std::size_t>(hidden);
    const std::size_t features = static_cast<std::size_t>(feature_total(config.features));
    const std::size_t enc_in = 2 + features + kAllTiming;
    const std::size_t dec_in = static_cast<std::size_t>(config.embedding_dim) + features + kAllTiming;
    const std::size_t latent = static_cast<std::size_t>(config.embedding_dim);
    std::size_t count = 0;
    count += 4 * h * enc_in + 4 * h * h + 4 * h;  // encoder layer 0
    count += 8 * h * h + 4 * h;                   // encoder layer 1
    count += 2 * latent * h + 2 * latent;         // variational projection
    count += 4 * h * dec_in + 4 * h * h + 4 * h;  // decoder layer 0
    count += 8 * h * h + 4 * h;                   // decoder layer 1
    count += 3 * (h + 1);                         // f0, c0, duration readouts
    return count;
}

int matched_baseline_hidden(const ModelConfig& config) {
    ChiveModel reference(config);
    const std::size_t target = reference.params().total_size();
    int best = 2;
    std::size_t best_gap = std::numeric_limits<std::size_t>::max();
    for (int h = 2; h <= 4096; ++h) {
        const std::size_t count = baseline_param_count(config, h);
        const std::size_t gap = count > target ? count - target : target - count;
        if (gap < best_gap) {
            best_gap = gap;
            best = h;
        }
        if (count > 2 * target) break;
    }
    return best;
}

BaselineModel::BaselineModel(const ModelConfig& config) : config_(config) {
    hidden_ = config.baseline_hidden > 0 ? config.baseline_hidden
                                         : matched_baseline_hidden(config);
    config_.baseline_hidden = hidden_;
    const std::uint32_t features = static_cast<std::uint32_t>(feature_total(config.features));
    encoder_ = add_lstm_stack(params_, "bl.enc", 2 + features + kAllTiming,
                              static_cast<std::uint32_t>(hidden_), 2);
    variational_ = add_variational(params_, "bl.var", static_cast<std::uint32_t>(hidden_),
                                   static_cast<std::uint32_t>(config.embedding_dim));
    decoder_ = add_lstm_stack(params_, "bl.dec",
                              static_cast<std::uint32_t>(config.embedding_dim) + features + kAllTiming,
                              static_cast<std::uint32_t>(hidden_), 2);
    f0_readout_ = add_affine(params_, "bl.f0_readout", static_cast<std::uint32_t>(hidden_), 1);
    c0_readout_ = add_affine(params_, "bl.c0_readout", static_cast<std::uint32_t>(hidden_), 1);
    duration_readout_ =
        add_affine(params_, "bl.duration_readout", static_cast<std::uint32_t>(hidden_), 1);
}

BaselineModel::BaselineModel(const ModelConfig& config, std::uint64_t seed)
    : BaselineModel(config) {
    Rng rng(mix_seed(seed, 0x696e6974));
    init_lstm_stack(params_, encoder_, rng);
    init_variational(params_, variational_, rng);
    init_lstm_stack(params_, decoder_, rng);
    init_affine(params_, f0_readout_, rng);
    init_affine(params_, c0_readout_, rng);
    init_affine(params_, duration_readout_, rng);
}

PosteriorNodes BaselineModel::encode_graph(Tape& tape, const UtteranceTree& tree,
                                           const ProsodicTargets& targets, const TreeIndex& index,
                                           EncoderTrace* trace) const {
    if (targets.durations.size() != index.phone_count)
        throw ValidationError("baseline encode: durations do not cover the phones");
    StackState state = zero_state(tape, encoder_);
    NodeId top = 0;
    std::size_t cursor = 0;
    for (std::size_t p = 0; p < index.phone_count; ++p) {
        const int frames = targets.durations[p];
        for (int k = 0; k < frames; ++k) {
            if (cursor >= targets.log_f0.size())
                throw ValidationError("baseline encode: frame targets shorter than durations");
            std::vector<double> input;
            const std::vector<double> rest = frame_features(tree, index, p, k, frames);
            input.reserve(2 + rest.size());
            input.push_back(targets.log_f0[cursor]);
            input.push_back(targets.c0[cursor]);
            input.insert(input.end(), rest.begin(), rest.end());
            top = stack_step(tape, params_, encoder_, state,
                             tape.leaf(std::span<const double>(input)));
            ++cursor;
            if (trace) ++trace->frame_steps;
        }
    }
    if (cursor != targets.log_f0.size())
        throw ValidationError("baseline encode: frame targets longer than durations");
    if (trace) ++trace->capture_count;
    return project(tape, params_, variational_, top);
}

DecodeNodes BaselineModel::decode_graph(Tape& tape, const UtteranceTree& tree,
                                        const TreeIndex& index, NodeId embedding,
                                        DurationMode mode, DecodeTrace* trace) const {
    if (tape.length(embedding) != static_cast<std::uint32_t>(config_.embedding_dim))
        throw ShapeError("baseline decode: embedding length mismatch");

    std::vector<int> truth;
    if (mode == DurationMode::kTeacherForced) truth = tree_durations(index);

    DecodeNodes out;
    out.durations_realized.assign(index.phone_count, 0);
    std::vector<NodeId> duration_raw(index.phone_count);
    std::vector<NodeId> f0_frames, c0_frames;

    StackState state = zero_state(tape, decoder_);
    for (std::size_t p = 0; p < index.phone_count; ++p) {
        int frames = (mode == DurationMode::kTeacherForced) ? truth[p] : 1;
        for (int k = 0; k < frames; ++k) {
            const std::vector<double> rest = frame_features(tree, index, p, k, frames);
            const std::array<NodeId, 2> parts{embedding,
                                              tape.leaf(std::span<const double>(rest))};
            const NodeId h = stack_step(tape, params_, decoder_, state, tape.concat(parts));
            f0_frames.push_back(affine_node(tape, params_, f0_readout_, h));
            c0_frames.push_back(affine_node(tape, params_, c0_readout_, h));
            if (trace) {
                ++trace->f0_steps;
                ++trace->c0_steps;
            }
            if (k == 0) {
                duration_raw[p] = affine_node(tape, params_, duration_readout_, h);
                if (trace) ++trace->duration_steps;
                if (mode == DurationMode::kFreeRunning)
                    frames = round_duration(tape.scalar(duration_raw[p]));
            }
        }
        out.durations_realized[p] = frames;
    }

    out.durations_raw = tape.concat(duration_raw);
    out.log_f0 = tape.concat(f0_frames);
    out.c0 = tape.concat(c0_frames);
    return out;
}

}  // namespace chive
