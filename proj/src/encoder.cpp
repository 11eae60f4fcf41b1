#include "chive/encoder.hpp"

#include <array>

#include "chive/errors.hpp"

namespace chive {

namespace {

constexpr int kFrameTiming = 3;
constexpr int kPhoneTiming = 4;
constexpr int kSyllableTiming = 4;
constexpr int kWordTiming = 64;

}  // namespace

EncoderRef add_encoder(ParameterStore& store, const std::string& prefix, const EncoderDims& dims,
                       const FeatureDims& features) {
    EncoderRef ref;
    ref.frame = add_lstm_stack(store, prefix + ".frame", 2 + kFrameTiming, dims.frame_hidden, 2);
    ref.phone = add_lstm_stack(store, prefix + ".phone", features.phone + kPhoneTiming,
                               dims.phone_hidden, 2);
    const std::uint32_t syllable_in = dims.frame_hidden + dims.phone_hidden + features.syllable +
                                      features.word + features.sentence + kSyllableTiming +
                                      kWordTiming;
    ref.syllable = add_lstm_stack(store, prefix + ".syllable", syllable_in, dims.syllable_hidden, 2);
    return ref;
}

void init_encoder(ParameterStore& store, const EncoderRef& ref, Rng& rng) {
    init_lstm_stack(store, ref.frame, rng);
    init_lstm_stack(store, ref.phone, rng);
    init_lstm_stack(store, ref.syllable, rng);
}

NodeId encode(Tape& tape, const ParameterStore& store, const EncoderRef& ref,
              const UtteranceTree& tree, const ProsodicTargets& targets, const TreeIndex& index,
              EncoderTrace* trace) {
    if (targets.durations.size() != index.phone_count)
        throw ValidationError("encode: targets carry " + std::to_string(targets.durations.size()) +
                              " durations for " + std::to_string(index.phone_count) + " phones");

    StackState syllable_state = zero_state(tape, ref.syllable);
    NodeId summary = 0;
    std::size_t frame_cursor = 0;

    for (std::size_t s = 0; s < index.syllable_count; ++s) {
        // frame- and phone-rate states reset at every syllable boundary
        StackState frame_state = zero_state(tape, ref.frame);
        StackState phone_state = zero_state(tape, ref.phone);
        NodeId frame_out = 0, phone_out = 0;

        for (std::size_t p = index.syllable_phone_begin[s]; p < index.syllable_phone_end[s]; ++p) {
            const int frames = targets.durations[p];
            std::array<double, 2 + kFrameTiming> frame_input{};
            for (int k = 0; k < frames; ++k) {
                if (frame_cursor >= targets.log_f0.size())
                    throw ValidationError("encode: frame targets shorter than sum of durations");
                frame_input[0] = targets.log_f0[frame_cursor];
                frame_input[1] = targets.c0[frame_cursor];
                timing_signal_into(relative_position(static_cast<std::size_t>(k),
                                                     static_cast<std::size_t>(frames)),
                                   kFrameTiming, frame_input.data() + 2);
                frame_out = stack_step(tape, store, ref.frame, frame_state,
                                       tape.leaf(std::span<const double>(frame_input)));
                ++frame_cursor;
                if (trace) ++trace->frame_steps;
            }

            const PhoneNode& phone = *index.phones[p];
            std::vector<double> phone_input(phone.features.begin(), phone.features.end());
            phone_input.resize(phone.features.size() + kPhoneTiming);
            timing_signal_into(index.phone_position[p], kPhoneTiming,
                               phone_input.data() + phone.features.size());
            phone_out = stack_step(tape, store, ref.phone, phone_state,
                                   tape.leaf(std::span<const double>(phone_input)));
            if (trace) ++trace->phone_steps;
        }

        // captures happen exactly at the syllable boundary
        if (trace) {
            ++trace->capture_count;
            if (trace->record) {
                auto f = tape.value(frame_out);
                auto p = tape.value(phone_out);
                trace->frame_captures.emplace_back(f.begin(), f.end());
                trace->phone_captures.emplace_back(p.begin(), p.end());
            }
        }

        const std::size_t w = index.syllable_word[s];
        const SyllableNode& syllable = *index.syllables[s];
        std::vector<double> rest;
        rest.reserve(syllable.features.size() + index.words[w]->features.size() +
                     tree.sentence_features.size() + kSyllableTiming + kWordTiming);
        rest.insert(rest.end(), syllable.features.begin(), syllable.features.end());
        rest.insert(rest.end(), index.words[w]->features.begin(), index.words[w]->features.end());
        rest.insert(rest.end(), tree.sentence_features.begin(), tree.sentence_features.end());
        const std::size_t timing_at = rest.size();
        rest.resize(timing_at + kSyllableTiming + kWordTiming);
        timing_signal_into(index.syllable_position[s], kSyllableTiming, rest.data() + timing_at);
        timing_signal_into(index.word_position[w], kWordTiming,
                           rest.data() + timing_at + kSyllableTiming);

        const std::array<NodeId, 3> parts{frame_out, phone_out,
                                          tape.leaf(std::span<const double>(rest))};
        const NodeId syllable_input = tape.concat(parts);
        if (trace && trace->record) {
            auto v = tape.value(syllable_input);
            trace->syllable_inputs.emplace_back(v.begin(), v.end());
        }
        summary = stack_step(tape, store, ref.syllable, syllable_state, syllable_input);
        if (trace) ++trace->syllable_steps;
    }

    if (frame_cursor != targets.log_f0.size())
        throw ValidationError("encode: frame targets longer than sum of durations");
    return summary;
}

}  // namespace chive
