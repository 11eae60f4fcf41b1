#pragma once

#include <memory>
#include <span>
#include <string>

#include "chive/decoder.hpp"
#include "chive/encoder.hpp"
#include "chive/params.hpp"
#include "chive/tree.hpp"
#include "chive/variational.hpp"

namespace chive {

struct ModelConfig {
    int embedding_dim = 256;
    int frame_hidden = 32;
    int phone_hidden = 32;
    int syllable_hidden = 32;
    int duration_hidden = 32;
    int baseline_hidden = 0;  // 0 = match the hierarchical model's parameter count
    FeatureDims features;

    bool operator==(const ModelConfig&) const = default;

    std::string to_json_string() const;
    static ModelConfig from_json_string(const std::string& text);
};

// Common surface of the hierarchical model and the frame-rate baseline:
// same corpora in, same prediction types out, same loss and metrics.
class ProsodyModel {
public:
    virtual ~ProsodyModel() = default;

    virtual const std::string& kind() const = 0;
    virtual const ModelConfig& config() const = 0;
    virtual ParameterStore& params() = 0;
    virtual const ParameterStore& params() const = 0;
    std::size_t parameter_count() const { return params().total_size(); }

    virtual PosteriorNodes encode_graph(Tape& tape, const UtteranceTree& tree,
                                        const ProsodicTargets& targets, const TreeIndex& index,
                                        EncoderTrace* trace = nullptr) const = 0;
    virtual DecodeNodes decode_graph(Tape& tape, const UtteranceTree& tree, const TreeIndex& index,
                                     NodeId embedding, DurationMode mode,
                                     DecodeTrace* trace = nullptr) const = 0;

    GaussianPosterior encode_posterior(const UtteranceTree& tree,
                                       const ProsodicTargets& targets) const;
    ProsodicPrediction decode(const UtteranceTree& tree, std::span<const double> embedding,
                              DurationMode mode, DecodeTrace* trace = nullptr) const;
};

ProsodicPrediction extract_prediction(const Tape& tape, const DecodeNodes& nodes,
                                      DurationMode mode);

// The clockwork hierarchical conditional variational model.
class ChiveModel final : public ProsodyModel {
public:
    explicit ChiveModel(const ModelConfig& config);            // zero parameters
    ChiveModel(const ModelConfig& config, std::uint64_t seed);  // random init

    const std::string& kind() const override { return kind_; }
    const ModelConfig& config() const override { return config_; }
    ParameterStore& params() override { return params_; }
    const ParameterStore& params() const override { return params_; }

    PosteriorNodes encode_graph(Tape& tape, const UtteranceTree& tree,
                                const ProsodicTargets& targets, const TreeIndex& index,
                                EncoderTrace* trace = nullptr) const override;
    // Summary exposed for tests that probe the encoder contract directly.
    NodeId summary_graph(Tape& tape, const UtteranceTree& tree, const ProsodicTargets& targets,
                         const TreeIndex& index, EncoderTrace* trace = nullptr) const;
    DecodeNodes decode_graph(Tape& tape, const UtteranceTree& tree, const TreeIndex& index,
                             NodeId embedding, DurationMode mode,
                             DecodeTrace* trace = nullptr) const override;

private:
    std::string kind_ = "chive";
    ModelConfig config_;
    ParameterStore params_;
    EncoderRef encoder_;
    VariationalRef variational_;
    DecoderRef decoder_;
};

static constexpr const char* kKindChive = "chive";
static constexpr const char* kKindBaseline = "baseline";

}  // namespace chive
