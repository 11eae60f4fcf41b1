#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "chive/errors.hpp"

namespace chive {

// 5 ms analysis frames; durations are frame counts.
constexpr double kFrameShiftMs = 5.0;

struct PhoneNode {
    std::vector<double> features;
    std::optional<int> duration_frames;  // ground truth; absent on bare inference input
};

struct SyllableNode {
    std::vector<double> features;
    std::vector<PhoneNode> phones;
};

struct WordNode {
    std::vector<double> features;
    std::vector<SyllableNode> syllables;
};

// The linguistic hierarchy driving the dynamic network layout.
struct UtteranceTree {
    std::string utterance_id;
    std::vector<double> sentence_features;  // includes the one-hot speaker slot
    std::vector<WordNode> words;
};

// Per-frame acoustics plus per-phone frame counts; also the regression target.
struct ProsodicTargets {
    std::vector<double> log_f0;  // natural log of Hz, one value per frame
    std::vector<double> c0;
    std::vector<int> durations;  // frames per phone, aligned with phone order

    std::size_t frame_count() const { return log_f0.size(); }
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
    std::string joined() const;
};

ValidationReport validate(const UtteranceTree& tree, const ProsodicTargets* targets = nullptr);

// index/(count-1), or 0 for an only child.
double relative_position(std::size_t index, std::size_t count);

enum class Level { kWord, kSyllable, kPhone, kFrame };

// 64 for words, 4 for syllables and phones, 3 for frames.
int timing_dim(Level level);

// Cosine coarse coding of a position in [0,1]: component j is a cosine bump
// 0.5*(1 + cos(pi*clamp((r - c_j)/w, -1, 1))) with centers c_j = j/(dim-1)
// and width w = 1/(dim-1). All components lie in [0,1].
std::vector<double> timing_signal(double pos, int dim);
void timing_signal_into(double pos, int dim, double* out);

// Flattened per-node positions and parent links; the layout the clocked
// stacks iterate over. Built from a validated tree.
struct TreeIndex {
    std::size_t word_count = 0;
    std::size_t syllable_count = 0;
    std::size_t phone_count = 0;

    std::vector<double> word_position;              // [W]
    std::vector<std::size_t> syllable_word;         // [S] owning word
    std::vector<double> syllable_position;          // [S] within word
    std::vector<std::size_t> syllable_phone_begin;  // [S]
    std::vector<std::size_t> syllable_phone_end;    // [S] one past last
    std::vector<std::size_t> phone_syllable;        // [P] owning syllable
    std::vector<double> phone_position;             // [P] within syllable

    std::vector<const WordNode*> words;          // [W]
    std::vector<const SyllableNode*> syllables;  // [S]
    std::vector<const PhoneNode*> phones;        // [P]

    std::size_t phones_in_syllable(std::size_t s) const {
        return syllable_phone_end[s] - syllable_phone_begin[s];
    }
};

TreeIndex positions(const UtteranceTree& tree);

struct FeatureDims {
    int sentence = 0;
    int word = 0;
    int syllable = 0;
    int phone = 0;

    bool operator==(const FeatureDims&) const = default;
};

FeatureDims feature_dims(const UtteranceTree& tree);

// Ground-truth durations as carried on the tree. Throws ValidationError when
// any phone lacks one.
std::vector<int> tree_durations(const TreeIndex& index);

// JSON interchange, schema "chive-utterance/1", file extension .utt.json.
std::string serialize(const UtteranceTree& tree, const ProsodicTargets* targets = nullptr);
std::pair<UtteranceTree, std::optional<ProsodicTargets>> deserialize(const std::string& text);

void save_utterance(const std::string& path, const UtteranceTree& tree,
                    const ProsodicTargets* targets = nullptr);
std::pair<UtteranceTree, std::optional<ProsodicTargets>> load_utterance(const std::string& path);

}  // namespace chive
