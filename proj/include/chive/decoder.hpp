#pragma once

#include <string>
#include <vector>

#include "chive/lstm.hpp"
#include "chive/params.hpp"
#include "chive/tape.hpp"
#include "chive/tree.hpp"

namespace chive {

enum class DurationMode {
    kTeacherForced,  // ground-truth durations set the unroll lengths
    kFreeRunning,    // rounded predicted durations set the unroll lengths
};

// Syllable- and phone-rate stacks feeding three output heads: a recurrent
// duration head read out per phone, and frame-rate c0/F0 stacks whose unroll
// lengths are data dependent.
struct DecoderRef {
    LstmStack syllable, phone, duration, c0, f0;
    AffineRef duration_readout, c0_readout, f0_readout;
    std::uint32_t embedding_dim = 0;
};

struct DecoderDims {
    std::uint32_t embedding_dim = 256;
    std::uint32_t syllable_hidden = 32;
    std::uint32_t phone_hidden = 32;
    std::uint32_t duration_hidden = 32;
    std::uint32_t frame_hidden = 32;  // c0 and F0 stacks
};

DecoderRef add_decoder(ParameterStore& store, const std::string& prefix, const DecoderDims& dims,
                       const FeatureDims& features);
void init_decoder(ParameterStore& store, const DecoderRef& ref, Rng& rng);

struct DecodeTrace {
    std::size_t syllable_steps = 0;
    std::size_t phone_steps = 0;
    std::size_t duration_steps = 0;
    std::size_t c0_steps = 0;
    std::size_t f0_steps = 0;
    std::vector<std::size_t> f0_steps_per_syllable;
};

struct DecodeNodes {
    NodeId durations_raw = 0;  // [P]
    NodeId log_f0 = 0;         // [T']
    NodeId c0 = 0;             // [T']
    std::vector<int> durations_realized;
};

DecodeNodes decode_graph(Tape& tape, const ParameterStore& store, const DecoderRef& ref,
                         const UtteranceTree& tree, const TreeIndex& index, NodeId embedding,
                         DurationMode mode, DecodeTrace* trace = nullptr);

// max(1, round half away from zero)
int round_duration(double raw);

// Decoder outputs plus the unroll lengths that produced them.
struct ProsodicPrediction {
    std::vector<double> durations_raw;
    std::vector<int> durations_realized;
    std::vector<double> log_f0;
    std::vector<double> c0;
    DurationMode mode = DurationMode::kFreeRunning;

    std::size_t frame_count() const { return log_f0.size(); }
};

// Plot-data serialization: JSON document, a frame_ms,log_f0,c0 CSV, and a
// per-phone duration table.
std::string prediction_to_json(const ProsodicPrediction& pred,
                               const std::vector<double>* embedding = nullptr);
void write_prediction_json(const std::string& path, const ProsodicPrediction& pred,
                           const std::vector<double>* embedding = nullptr);
void write_contour_csv(const std::string& path, const ProsodicPrediction& pred);
void write_durations_csv(const std::string& path, const ProsodicPrediction& pred);

}  // namespace chive
