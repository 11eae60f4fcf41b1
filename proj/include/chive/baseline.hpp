#pragma once

#include "chive/model.hpp"

namespace chive {

// Frame-rate comparison model: one 2-layer stack each way, every linguistic
// feature broadcast to frame steps, no dynamic structure. Phone durations
// are read out at each phone's first frame, which keeps free-running decode
// strictly frame-clocked.
class BaselineModel final : public ProsodyModel {
public:
    explicit BaselineModel(const ModelConfig& config);
    BaselineModel(const ModelConfig& config, std::uint64_t seed);

    const std::string& kind() const override { return kind_; }
    const ModelConfig& config() const override { return config_; }
    ParameterStore& params() override { return params_; }
    const ParameterStore& params() const override { return params_; }

    PosteriorNodes encode_graph(Tape& tape, const UtteranceTree& tree,
                                const ProsodicTargets& targets, const TreeIndex& index,
                                EncoderTrace* trace = nullptr) const override;
    DecodeNodes decode_graph(Tape& tape, const UtteranceTree& tree, const TreeIndex& index,
                             NodeId embedding, DurationMode mode,
                             DecodeTrace* trace = nullptr) const override;

    int hidden() const { return hidden_; }

private:
    std::string kind_ = "baseline";
    ModelConfig config_;
    int hidden_ = 0;
    ParameterStore params_;
    LstmStack encoder_, decoder_;
    VariationalRef variational_;
    AffineRef f0_readout_, c0_readout_, duration_readout_;
};

// Closed-form parameter count of a baseline with the given hidden width.
std::size_t baseline_param_count(const ModelConfig& config, int hidden);

// Smallest-width hidden size whose parameter count is closest to the
// hierarchical model's for the same config.
int matched_baseline_hidden(const ModelConfig& config);

}  // namespace chive
