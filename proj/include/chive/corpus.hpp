#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "chive/rng.hpp"
#include "chive/tree.hpp"

namespace chive {

struct CorpusConfig {
    std::size_t utterance_count = 2200;
    int min_words = 2, max_words = 6;
    int min_syllables = 1, max_syllables = 4;  // per word
    int min_phones = 1, max_phones = 3;        // per syllable
    int min_duration = 3, max_duration = 12;   // frames per phone
    int speaker_count = 4;
    int phone_inventory = 20;
    double noise_scale = 0.02;
};

// Hidden per-utterance style: a global pitch shift and an accent amplitude
// scale. Drives the acoustics only; never present in the feature vectors.
struct StyleFactor {
    double z_offset = 0.0;  // in [-1, 1]
    double z_range = 0.0;   // in [-1, 1]
};

struct CorpusItem {
    UtteranceTree tree;
    ProsodicTargets targets;
    std::optional<StyleFactor> style;  // sidecar data, absent on bare corpora
};

// Per-speaker pitch baseline, log Hz.
double speaker_base_logf0(int speaker);

// Structure and features only; durations drawn and fixed on the phones.
UtteranceTree generate_structure(const CorpusConfig& config, const std::string& utterance_id,
                                 int speaker, Rng& rng);

// Acoustics for a structure: declination from the speaker base, cosine
// accent arches on stressed syllables scaled by the style, Gaussian noise.
ProsodicTargets render_targets(const UtteranceTree& tree, const StyleFactor& style,
                               double noise_scale, Rng& rng);

int tree_speaker(const UtteranceTree& tree, int speaker_count);

std::vector<CorpusItem> generate(const CorpusConfig& config, std::uint64_t seed, int jobs = 1);

// Deterministic, structure-stratified by word count; returns (train, eval)
// index lists. Throws on degenerate sizes.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    const std::vector<CorpusItem>& corpus, double train_fraction, std::uint64_t seed);

// Directory layout: NNNNN.utt.json per utterance, styles.json sidecar,
// manifest.json with the config echo, seed and file checksums.
void write_corpus(const std::string& dir, const std::vector<CorpusItem>& corpus,
                  const CorpusConfig& config, std::uint64_t seed);

struct LoadedCorpus {
    std::vector<CorpusItem> items;
    CorpusConfig config;
    std::uint64_t seed = 0;
};

LoadedCorpus load_corpus(const std::string& dir, bool verify_checksums = true);

}  // namespace chive
