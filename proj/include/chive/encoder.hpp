#pragma once

#include <vector>

#include "chive/lstm.hpp"
#include "chive/params.hpp"
#include "chive/tape.hpp"
#include "chive/tree.hpp"

namespace chive {

// Frame-, phone- and syllable-rate stacks. The frame and phone stacks are
// clocked syllable-synchronously: their states reset at every syllable start
// and their top hidden output is captured at every syllable end.
struct EncoderRef {
    LstmStack frame, phone, syllable;
};

struct EncoderDims {
    std::uint32_t frame_hidden = 32;
    std::uint32_t phone_hidden = 32;
    std::uint32_t syllable_hidden = 32;
};

EncoderRef add_encoder(ParameterStore& store, const std::string& prefix, const EncoderDims& dims,
                       const FeatureDims& features);
void init_encoder(ParameterStore& store, const EncoderRef& ref, Rng& rng);

struct EncoderTrace {
    std::size_t frame_steps = 0;
    std::size_t phone_steps = 0;
    std::size_t syllable_steps = 0;
    std::size_t capture_count = 0;
    bool record = false;  // fill the vectors below when set
    std::vector<std::vector<double>> frame_captures;
    std::vector<std::vector<double>> phone_captures;
    std::vector<std::vector<double>> syllable_inputs;
};

// Returns the summary node: the final top hidden activation of the
// syllable-rate stack. Requires targets (frames and per-phone durations).
NodeId encode(Tape& tape, const ParameterStore& store, const EncoderRef& ref,
              const UtteranceTree& tree, const ProsodicTargets& targets, const TreeIndex& index,
              EncoderTrace* trace = nullptr);

}  // namespace chive
