#include "chive/tree.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace chive {

namespace {

using nlohmann::json;

constexpr const char* kSchema = "chive-utterance/1";

void note(ValidationReport& report, const std::string& message) {
    report.violations.push_back(message);
}

}  // namespace

std::string ValidationReport::joined() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < violations.size(); ++i) {
        if (i) out << "; ";
        out << violations[i];
    }
    return out.str();
}

ValidationReport validate(const UtteranceTree& tree, const ProsodicTargets* targets) {
    ValidationReport report;

    if (tree.words.empty()) note(report, "utterance has no words");

    int word_dim = -1, syllable_dim = -1, phone_dim = -1;
    std::size_t phone_count = 0;
    std::size_t with_duration = 0;
    long long total_frames = 0;

    for (std::size_t w = 0; w < tree.words.size(); ++w) {
        const WordNode& word = tree.words[w];
        if (word_dim < 0) word_dim = static_cast<int>(word.features.size());
        if (static_cast<int>(word.features.size()) != word_dim)
            note(report, "word " + std::to_string(w) + " feature dimension mismatch");
        if (word.syllables.empty()) {
            note(report, "empty word " + std::to_string(w));
            continue;
        }
        for (std::size_t s = 0; s < word.syllables.size(); ++s) {
            const SyllableNode& syllable = word.syllables[s];
            if (syllable_dim < 0) syllable_dim = static_cast<int>(syllable.features.size());
            if (static_cast<int>(syllable.features.size()) != syllable_dim)
                note(report, "syllable feature dimension mismatch in word " + std::to_string(w));
            if (syllable.phones.empty()) {
                note(report, "empty syllable " + std::to_string(s) + " in word " + std::to_string(w));
                continue;
            }
            for (const PhoneNode& phone : syllable.phones) {
                ++phone_count;
                if (phone_dim < 0) phone_dim = static_cast<int>(phone.features.size());
                if (static_cast<int>(phone.features.size()) != phone_dim)
                    note(report, "phone feature dimension mismatch in word " + std::to_string(w));
                if (phone.duration_frames) {
                    ++with_duration;
                    if (*phone.duration_frames < 1)
                        note(report, "non-positive duration on phone " +
                                         std::to_string(phone_count - 1));
                    else
                        total_frames += *phone.duration_frames;
                }
            }
        }
    }

    if (with_duration != 0 && with_duration != phone_count)
        note(report, "durations present on some phones but not all");

    if (targets) {
        if (targets->durations.size() != phone_count)
            note(report, "targets carry " + std::to_string(targets->durations.size()) +
                             " durations for " + std::to_string(phone_count) + " phones");
        long long t = 0;
        for (std::size_t p = 0; p < targets->durations.size(); ++p) {
            if (targets->durations[p] < 1)
                note(report, "non-positive duration in targets at phone " + std::to_string(p));
            else
                t += targets->durations[p];
        }
        if (t != static_cast<long long>(targets->log_f0.size()) ||
            targets->log_f0.size() != targets->c0.size())
            note(report, "T != sum(durations): log_f0 length " +
                             std::to_string(targets->log_f0.size()) + ", c0 length " +
                             std::to_string(targets->c0.size()) + ", sum " + std::to_string(t));
        if (with_duration == phone_count && targets->durations.size() == phone_count) {
            std::size_t p = 0;
            for (const WordNode& word : tree.words)
                for (const SyllableNode& syllable : word.syllables)
                    for (const PhoneNode& phone : syllable.phones) {
                        if (phone.duration_frames && *phone.duration_frames != targets->durations[p])
                            note(report, "tree/target duration mismatch at phone " + std::to_string(p));
                        ++p;
                    }
        }
        for (double v : targets->log_f0)
            if (!std::isfinite(v)) {
                note(report, "non-finite log_f0 value");
                break;
            }
        for (double v : targets->c0)
            if (!std::isfinite(v)) {
                note(report, "non-finite c0 value");
                break;
            }
    }

    return report;
}

double relative_position(std::size_t index, std::size_t count) {
    if (count <= 1) return 0.0;
    return static_cast<double>(index) / static_cast<double>(count - 1);
}

int timing_dim(Level level) {
    switch (level) {
        case Level::kWord: return 64;
        case Level::kSyllable: return 4;
        case Level::kPhone: return 4;
        case Level::kFrame: return 3;
    }
    return 0;
}

void timing_signal_into(double pos, int dim, double* out) {
    if (!(pos >= 0.0 && pos <= 1.0))
        throw std::invalid_argument("timing_signal: position " + std::to_string(pos) +
                                    " outside [0,1]");
    if (dim < 2) throw std::invalid_argument("timing_signal: dim must be >= 2");
    const double width = 1.0 / (dim - 1);
    for (int j = 0; j < dim; ++j) {
        const double center = static_cast<double>(j) * width;
        double u = (pos - center) / width;
        if (u < -1.0) u = -1.0;
        if (u > 1.0) u = 1.0;
        out[j] = 0.5 * (1.0 + std::cos(3.14159265358979323846 * u));
    }
}

std::vector<double> timing_signal(double pos, int dim) {
    std::vector<double> out(static_cast<std::size_t>(dim));
    timing_signal_into(pos, dim, out.data());
    return out;
}

TreeIndex positions(const UtteranceTree& tree) {
    TreeIndex index;
    index.word_count = tree.words.size();
    for (std::size_t w = 0; w < tree.words.size(); ++w) {
        const WordNode& word = tree.words[w];
        index.words.push_back(&word);
        index.word_position.push_back(relative_position(w, tree.words.size()));
        for (std::size_t s = 0; s < word.syllables.size(); ++s) {
            const SyllableNode& syllable = word.syllables[s];
            index.syllables.push_back(&syllable);
            index.syllable_word.push_back(w);
            index.syllable_position.push_back(relative_position(s, word.syllables.size()));
            index.syllable_phone_begin.push_back(index.phones.size());
            for (std::size_t p = 0; p < syllable.phones.size(); ++p) {
                index.phones.push_back(&syllable.phones[p]);
                index.phone_syllable.push_back(index.syllables.size() - 1);
                index.phone_position.push_back(relative_position(p, syllable.phones.size()));
            }
            index.syllable_phone_end.push_back(index.phones.size());
        }
    }
    index.syllable_count = index.syllables.size();
    index.phone_count = index.phones.size();
    return index;
}

FeatureDims feature_dims(const UtteranceTree& tree) {
    FeatureDims dims;
    dims.sentence = static_cast<int>(tree.sentence_features.size());
    if (!tree.words.empty()) {
        dims.word = static_cast<int>(tree.words.front().features.size());
        if (!tree.words.front().syllables.empty()) {
            const SyllableNode& syllable = tree.words.front().syllables.front();
            dims.syllable = static_cast<int>(syllable.features.size());
            if (!syllable.phones.empty())
                dims.phone = static_cast<int>(syllable.phones.front().features.size());
        }
    }
    return dims;
}

std::vector<int> tree_durations(const TreeIndex& index) {
    std::vector<int> durations;
    durations.reserve(index.phone_count);
    for (const PhoneNode* phone : index.phones) {
        if (!phone->duration_frames)
            throw ValidationError("ground-truth durations required but missing on the tree");
        durations.push_back(*phone->duration_frames);
    }
    return durations;
}

std::string serialize(const UtteranceTree& tree, const ProsodicTargets* targets) {
    json doc;
    doc["schema"] = kSchema;
    doc["utterance_id"] = tree.utterance_id;
    doc["sentence_features"] = tree.sentence_features;
    json words = json::array();
    for (const WordNode& word : tree.words) {
        json jw;
        jw["features"] = word.features;
        json syllables = json::array();
        for (const SyllableNode& syllable : word.syllables) {
            json js;
            js["features"] = syllable.features;
            json phones = json::array();
            for (const PhoneNode& phone : syllable.phones) {
                json jp;
                jp["features"] = phone.features;
                if (phone.duration_frames) jp["duration_frames"] = *phone.duration_frames;
                phones.push_back(std::move(jp));
            }
            js["phones"] = std::move(phones);
            syllables.push_back(std::move(js));
        }
        jw["syllables"] = std::move(syllables);
        words.push_back(std::move(jw));
    }
    doc["words"] = std::move(words);
    if (targets) {
        json jt;
        jt["log_f0"] = targets->log_f0;
        jt["c0"] = targets->c0;
        jt["durations"] = targets->durations;
        doc["targets"] = std::move(jt);
    }
    return doc.dump(2) + "\n";
}

std::pair<UtteranceTree, std::optional<ProsodicTargets>> deserialize(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("cannot parse utterance document: ") + e.what());
    }
    try {
        if (!doc.contains("schema") || doc["schema"].get<std::string>() != kSchema)
            throw ParseError("unknown utterance schema version (expected " +
                             std::string(kSchema) + ")");
        UtteranceTree tree;
        tree.utterance_id = doc.at("utterance_id").get<std::string>();
        tree.sentence_features = doc.at("sentence_features").get<std::vector<double>>();
        for (const json& jw : doc.at("words")) {
            WordNode word;
            word.features = jw.at("features").get<std::vector<double>>();
            for (const json& js : jw.at("syllables")) {
                SyllableNode syllable;
                syllable.features = js.at("features").get<std::vector<double>>();
                for (const json& jp : js.at("phones")) {
                    PhoneNode phone;
                    phone.features = jp.at("features").get<std::vector<double>>();
                    if (jp.contains("duration_frames"))
                        phone.duration_frames = jp["duration_frames"].get<int>();
                    syllable.phones.push_back(std::move(phone));
                }
                word.syllables.push_back(std::move(syllable));
            }
            tree.words.push_back(std::move(word));
        }
        std::optional<ProsodicTargets> targets;
        if (doc.contains("targets")) {
            const json& jt = doc["targets"];
            ProsodicTargets t;
            t.log_f0 = jt.at("log_f0").get<std::vector<double>>();
            t.c0 = jt.at("c0").get<std::vector<double>>();
            t.durations = jt.at("durations").get<std::vector<int>>();
            targets = std::move(t);
        }
        return {std::move(tree), std::move(targets)};
    } catch (const ParseError&) {
        throw;
    } catch (const json::exception& e) {
        throw ParseError(std::string("utterance document violates schema: ") + e.what());
    }
}

void save_utterance(const std::string& path, const UtteranceTree& tree,
                    const ProsodicTargets* targets) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << serialize(tree, targets);
    if (!out) throw IoError("write failed: " + path);
}

std::pair<UtteranceTree, std::optional<ProsodicTargets>> load_utterance(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return deserialize(buffer.str());
}

}  // namespace chive
