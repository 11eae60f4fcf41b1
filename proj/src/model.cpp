#include "chive/model.hpp"

#include <json.hpp>

#include "chive/errors.hpp"
#include "chive/rng.hpp"

namespace chive {

std::string ModelConfig::to_json_string() const {
    nlohmann::json doc;
    doc["embedding_dim"] = embedding_dim;
    doc["frame_hidden"] = frame_hidden;
    doc["phone_hidden"] = phone_hidden;
    doc["syllable_hidden"] = syllable_hidden;
    doc["duration_hidden"] = duration_hidden;
    doc["baseline_hidden"] = baseline_hidden;
    doc["features"] = {{"sentence", features.sentence},
                       {"word", features.word},
                       {"syllable", features.syllable},
                       {"phone", features.phone}};
    return doc.dump();
}

ModelConfig ModelConfig::from_json_string(const std::string& text) {
    try {
        const nlohmann::json doc = nlohmann::json::parse(text);
        ModelConfig config;
        config.embedding_dim = doc.at("embedding_dim").get<int>();
        config.frame_hidden = doc.at("frame_hidden").get<int>();
        config.phone_hidden = doc.at("phone_hidden").get<int>();
        config.syllable_hidden = doc.at("syllable_hidden").get<int>();
        config.duration_hidden = doc.at("duration_hidden").get<int>();
        config.baseline_hidden = doc.at("baseline_hidden").get<int>();
        const nlohmann::json& f = doc.at("features");
        config.features.sentence = f.at("sentence").get<int>();
        config.features.word = f.at("word").get<int>();
        config.features.syllable = f.at("syllable").get<int>();
        config.features.phone = f.at("phone").get<int>();
        return config;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad model config: ") + e.what());
    }
}

GaussianPosterior ProsodyModel::encode_posterior(const UtteranceTree& tree,
                                                 const ProsodicTargets& targets) const {
    Tape tape;
    const TreeIndex index = positions(tree);
    const PosteriorNodes post = encode_graph(tape, tree, targets, index);
    return posterior_values(tape, post);
}

ProsodicPrediction ProsodyModel::decode(const UtteranceTree& tree,
                                        std::span<const double> embedding, DurationMode mode,
                                        DecodeTrace* trace) const {
    Tape tape;
    const TreeIndex index = positions(tree);
    const NodeId s = tape.leaf(embedding);
    const DecodeNodes nodes = decode_graph(tape, tree, index, s, mode, trace);
    return extract_prediction(tape, nodes, mode);
}

ProsodicPrediction extract_prediction(const Tape& tape, const DecodeNodes& nodes,
                                      DurationMode mode) {
    ProsodicPrediction pred;
    auto raw = tape.value(nodes.durations_raw);
    auto f0 = tape.value(nodes.log_f0);
    auto c0 = tape.value(nodes.c0);
    pred.durations_raw.assign(raw.begin(), raw.end());
    pred.log_f0.assign(f0.begin(), f0.end());
    pred.c0.assign(c0.begin(), c0.end());
    pred.durations_realized = nodes.durations_realized;
    pred.mode = mode;
    return pred;
}

ChiveModel::ChiveModel(const ModelConfig& config) : config_(config) {
    EncoderDims enc;
    enc.frame_hidden = config.frame_hidden;
    enc.phone_hidden = config.phone_hidden;
    enc.syllable_hidden = config.syllable_hidden;
    encoder_ = add_encoder(params_, "enc", enc, config.features);
    variational_ = add_variational(params_, "var", config.syllable_hidden, config.embedding_dim);
    DecoderDims dec;
    dec.embedding_dim = config.embedding_dim;
    dec.syllable_hidden = config.syllable_hidden;
    dec.phone_hidden = config.phone_hidden;
    dec.duration_hidden = config.duration_hidden;
    dec.frame_hidden = config.frame_hidden;
    decoder_ = add_decoder(params_, "dec", dec, config.features);
}

ChiveModel::ChiveModel(const ModelConfig& config, std::uint64_t seed) : ChiveModel(config) {
    Rng rng(mix_seed(seed, 0x696e6974));  // "init" stream
    init_encoder(params_, encoder_, rng);
    init_variational(params_, variational_, rng);
    init_decoder(params_, decoder_, rng);
}

NodeId ChiveModel::summary_graph(Tape& tape, const UtteranceTree& tree,
                                 const ProsodicTargets& targets, const TreeIndex& index,
                                 EncoderTrace* trace) const {
    return encode(tape, params_, encoder_, tree, targets, index, trace);
}

PosteriorNodes ChiveModel::encode_graph(Tape& tape, const UtteranceTree& tree,
                                        const ProsodicTargets& targets, const TreeIndex& index,
                                        EncoderTrace* trace) const {
    const NodeId summary = encode(tape, params_, encoder_, tree, targets, index, trace);
    return project(tape, params_, variational_, summary);
}

DecodeNodes ChiveModel::decode_graph(Tape& tape, const UtteranceTree& tree, const TreeIndex& index,
                                     NodeId embedding, DurationMode mode,
                                     DecodeTrace* trace) const {
    return chive::decode_graph(tape, params_, decoder_, tree, index, embedding, mode, trace);
}

}  // namespace chive
