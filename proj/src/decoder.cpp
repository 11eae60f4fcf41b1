#include "chive/decoder.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "chive/errors.hpp"

namespace chive {

namespace {

constexpr int kFrameTiming = 3;
constexpr int kPhoneTiming = 4;
constexpr int kSyllableTiming = 4;
constexpr int kWordTiming = 64;

}  // namespace

DecoderRef add_decoder(ParameterStore& store, const std::string& prefix, const DecoderDims& dims,
                       const FeatureDims& features) {
    DecoderRef ref;
    ref.embedding_dim = dims.embedding_dim;
    const std::uint32_t shared = features.sentence + features.word + features.syllable;
    ref.syllable = add_lstm_stack(store, prefix + ".syllable",
                                  dims.embedding_dim + shared + kWordTiming + kSyllableTiming,
                                  dims.syllable_hidden, 2);
    ref.phone = add_lstm_stack(store, prefix + ".phone",
                               dims.syllable_hidden + shared + features.phone + kPhoneTiming,
                               dims.phone_hidden, 2);
    ref.duration =
        add_lstm_stack(store, prefix + ".duration", dims.phone_hidden, dims.duration_hidden, 1);
    ref.duration_readout = add_affine(store, prefix + ".duration_readout", dims.duration_hidden, 1);
    ref.c0 = add_lstm_stack(store, prefix + ".c0", dims.phone_hidden + kFrameTiming,
                            dims.frame_hidden, 2);
    ref.c0_readout = add_affine(store, prefix + ".c0_readout", dims.frame_hidden, 1);
    ref.f0 = add_lstm_stack(store, prefix + ".f0",
                            dims.syllable_hidden + dims.phone_hidden + kFrameTiming,
                            dims.frame_hidden, 2);
    ref.f0_readout = add_affine(store, prefix + ".f0_readout", dims.frame_hidden, 1);
    return ref;
}

void init_decoder(ParameterStore& store, const DecoderRef& ref, Rng& rng) {
    init_lstm_stack(store, ref.syllable, rng);
    init_lstm_stack(store, ref.phone, rng);
    init_lstm_stack(store, ref.duration, rng);
    init_affine(store, ref.duration_readout, rng);
    init_lstm_stack(store, ref.c0, rng);
    init_affine(store, ref.c0_readout, rng);
    init_lstm_stack(store, ref.f0, rng);
    init_affine(store, ref.f0_readout, rng);
}

int round_duration(double raw) {
    if (!std::isfinite(raw)) throw NumericError("round_duration: non-finite duration");
    const long long rounded = std::llround(raw);  // half away from zero
    return rounded < 1 ? 1 : static_cast<int>(rounded);
}

DecodeNodes decode_graph(Tape& tape, const ParameterStore& store, const DecoderRef& ref,
                         const UtteranceTree& tree, const TreeIndex& index, NodeId embedding,
                         DurationMode mode, DecodeTrace* trace) {
    if (tape.length(embedding) != ref.embedding_dim)
        throw ShapeError("decode: embedding length " + std::to_string(tape.length(embedding)) +
                         " does not match configured " + std::to_string(ref.embedding_dim));

    std::vector<int> truth;
    if (mode == DurationMode::kTeacherForced) truth = tree_durations(index);

    // syllable-rate pass: a_s
    std::vector<NodeId> syllable_act(index.syllable_count);
    StackState syllable_state = zero_state(tape, ref.syllable);
    for (std::size_t s = 0; s < index.syllable_count; ++s) {
        const std::size_t w = index.syllable_word[s];
        std::vector<double> rest;
        rest.insert(rest.end(), tree.sentence_features.begin(), tree.sentence_features.end());
        rest.insert(rest.end(), index.words[w]->features.begin(), index.words[w]->features.end());
        rest.insert(rest.end(), index.syllables[s]->features.begin(),
                    index.syllables[s]->features.end());
        const std::size_t timing_at = rest.size();
        rest.resize(timing_at + kWordTiming + kSyllableTiming);
        timing_signal_into(index.word_position[w], kWordTiming, rest.data() + timing_at);
        timing_signal_into(index.syllable_position[s], kSyllableTiming,
                           rest.data() + timing_at + kWordTiming);
        const std::array<NodeId, 2> parts{embedding, tape.leaf(std::span<const double>(rest))};
        syllable_act[s] =
            stack_step(tape, store, ref.syllable, syllable_state, tape.concat(parts));
        if (trace) ++trace->syllable_steps;
    }

    // phone-rate pass: b_p
    std::vector<NodeId> phone_act(index.phone_count);
    StackState phone_state = zero_state(tape, ref.phone);
    for (std::size_t p = 0; p < index.phone_count; ++p) {
        const std::size_t s = index.phone_syllable[p];
        const std::size_t w = index.syllable_word[s];
        std::vector<double> rest;
        rest.insert(rest.end(), tree.sentence_features.begin(), tree.sentence_features.end());
        rest.insert(rest.end(), index.words[w]->features.begin(), index.words[w]->features.end());
        rest.insert(rest.end(), index.syllables[s]->features.begin(),
                    index.syllables[s]->features.end());
        rest.insert(rest.end(), index.phones[p]->features.begin(), index.phones[p]->features.end());
        const std::size_t timing_at = rest.size();
        rest.resize(timing_at + kPhoneTiming);
        timing_signal_into(index.phone_position[p], kPhoneTiming, rest.data() + timing_at);
        const std::array<NodeId, 2> parts{syllable_act[s],
                                          tape.leaf(std::span<const double>(rest))};
        phone_act[p] = stack_step(tape, store, ref.phone, phone_state, tape.concat(parts));
        if (trace) ++trace->phone_steps;
    }

    // duration head: recurrent over phone activations, scalar readout each
    std::vector<NodeId> duration_raw(index.phone_count);
    StackState duration_state = zero_state(tape, ref.duration);
    for (std::size_t p = 0; p < index.phone_count; ++p) {
        const NodeId h = stack_step(tape, store, ref.duration, duration_state, phone_act[p]);
        duration_raw[p] = affine_node(tape, store, ref.duration_readout, h);
        if (trace) ++trace->duration_steps;
    }

    DecodeNodes out;
    out.durations_raw = tape.concat(duration_raw);

    out.durations_realized.resize(index.phone_count);
    for (std::size_t p = 0; p < index.phone_count; ++p)
        out.durations_realized[p] = (mode == DurationMode::kTeacherForced)
                                        ? truth[p]
                                        : round_duration(tape.scalar(duration_raw[p]));

    // c0 stack: per phone, constant input, state chained phone to phone
    std::vector<NodeId> c0_frames;
    StackState c0_state = zero_state(tape, ref.c0);
    std::array<double, kFrameTiming> timing{};
    for (std::size_t p = 0; p < index.phone_count; ++p) {
        const int frames = out.durations_realized[p];
        for (int k = 0; k < frames; ++k) {
            timing_signal_into(relative_position(static_cast<std::size_t>(k),
                                                 static_cast<std::size_t>(frames)),
                               kFrameTiming, timing.data());
            const std::array<NodeId, 2> parts{phone_act[p],
                                              tape.leaf(std::span<const double>(timing))};
            const NodeId h = stack_step(tape, store, ref.c0, c0_state, tape.concat(parts));
            c0_frames.push_back(affine_node(tape, store, ref.c0_readout, h));
            if (trace) ++trace->c0_steps;
        }
    }
    out.c0 = tape.concat(c0_frames);

    // F0 stack: per syllable, unroll the summed phone durations; the input
    // carries the syllable activation and the syllable's last phone activation
    std::vector<NodeId> f0_frames;
    StackState f0_state = zero_state(tape, ref.f0);
    for (std::size_t s = 0; s < index.syllable_count; ++s) {
        const std::size_t last_phone = index.syllable_phone_end[s] - 1;
        const NodeId b_last = phone_act[last_phone];
        std::size_t steps = 0;
        for (std::size_t p = index.syllable_phone_begin[s]; p < index.syllable_phone_end[s]; ++p) {
            const int frames = out.durations_realized[p];
            for (int k = 0; k < frames; ++k) {
                timing_signal_into(relative_position(static_cast<std::size_t>(k),
                                                     static_cast<std::size_t>(frames)),
                                   kFrameTiming, timing.data());
                const std::array<NodeId, 3> parts{syllable_act[s], b_last,
                                                  tape.leaf(std::span<const double>(timing))};
                const NodeId h = stack_step(tape, store, ref.f0, f0_state, tape.concat(parts));
                f0_frames.push_back(affine_node(tape, store, ref.f0_readout, h));
                ++steps;
                if (trace) ++trace->f0_steps;
            }
        }
        if (trace) trace->f0_steps_per_syllable.push_back(steps);
    }
    out.log_f0 = tape.concat(f0_frames);
    return out;
}

std::string prediction_to_json(const ProsodicPrediction& pred,
                               const std::vector<double>* embedding) {
    nlohmann::json doc;
    doc["schema"] = "chive-prediction/1";
    doc["mode"] =
        pred.mode == DurationMode::kTeacherForced ? "teacher_forced" : "free_running";
    doc["durations_raw"] = pred.durations_raw;
    doc["durations_realized"] = pred.durations_realized;
    doc["log_f0"] = pred.log_f0;
    doc["c0"] = pred.c0;
    doc["frame_shift_ms"] = kFrameShiftMs;
    if (embedding) doc["embedding"] = *embedding;
    return doc.dump(2) + "\n";
}

void write_prediction_json(const std::string& path, const ProsodicPrediction& pred,
                           const std::vector<double>* embedding) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << prediction_to_json(pred, embedding);
    if (!out) throw IoError("write failed: " + path);
}

void write_contour_csv(const std::string& path, const ProsodicPrediction& pred) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << "frame_ms,log_f0,c0\n";
    char line[96];
    for (std::size_t t = 0; t < pred.log_f0.size(); ++t) {
        std::snprintf(line, sizeof(line), "%.1f,%.10g,%.10g\n",
                      kFrameShiftMs * static_cast<double>(t), pred.log_f0[t], pred.c0[t]);
        out << line;
    }
    if (!out) throw IoError("write failed: " + path);
}

void write_durations_csv(const std::string& path, const ProsodicPrediction& pred) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << "phone,frames,ms\n";
    char line[96];
    for (std::size_t p = 0; p < pred.durations_realized.size(); ++p) {
        std::snprintf(line, sizeof(line), "%zu,%d,%.1f\n", p, pred.durations_realized[p],
                      kFrameShiftMs * pred.durations_realized[p]);
        out << line;
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace chive
