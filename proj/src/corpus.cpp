#include "chive/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "chive/digest.hpp"
#include "chive/errors.hpp"
#include "chive/parallel.hpp"

namespace chive {

namespace {

using nlohmann::json;

constexpr const char* kManifestSchema = "chive-corpus/1";

std::string utterance_name(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05zu", i);
    return std::string(buf);
}

json config_to_json(const CorpusConfig& c) {
    json doc;
    doc["utterance_count"] = c.utterance_count;
    doc["min_words"] = c.min_words;
    doc["max_words"] = c.max_words;
    doc["min_syllables"] = c.min_syllables;
    doc["max_syllables"] = c.max_syllables;
    doc["min_phones"] = c.min_phones;
    doc["max_phones"] = c.max_phones;
    doc["min_duration"] = c.min_duration;
    doc["max_duration"] = c.max_duration;
    doc["speaker_count"] = c.speaker_count;
    doc["phone_inventory"] = c.phone_inventory;
    doc["noise_scale"] = c.noise_scale;
    return doc;
}

CorpusConfig config_from_json(const json& doc) {
    CorpusConfig c;
    c.utterance_count = doc.at("utterance_count").get<std::size_t>();
    c.min_words = doc.at("min_words").get<int>();
    c.max_words = doc.at("max_words").get<int>();
    c.min_syllables = doc.at("min_syllables").get<int>();
    c.max_syllables = doc.at("max_syllables").get<int>();
    c.min_phones = doc.at("min_phones").get<int>();
    c.max_phones = doc.at("max_phones").get<int>();
    c.min_duration = doc.at("min_duration").get<int>();
    c.max_duration = doc.at("max_duration").get<int>();
    c.speaker_count = doc.at("speaker_count").get<int>();
    c.phone_inventory = doc.at("phone_inventory").get<int>();
    c.noise_scale = doc.at("noise_scale").get<double>();
    return c;
}

void check_config(const CorpusConfig& c) {
    if (c.utterance_count == 0) throw ValidationError("corpus: utterance_count must be positive");
    if (c.min_words < 1 || c.max_words < c.min_words)
        throw ValidationError("corpus: bad word count range");
    if (c.min_syllables < 1 || c.max_syllables < c.min_syllables)
        throw ValidationError("corpus: bad syllable count range");
    if (c.min_phones < 1 || c.max_phones < c.min_phones)
        throw ValidationError("corpus: bad phone count range");
    if (c.min_duration < 1 || c.max_duration < c.min_duration)
        throw ValidationError("corpus: bad duration range");
    if (c.speaker_count < 1 || c.phone_inventory < 1)
        throw ValidationError("corpus: speaker and phone inventory must be positive");
    if (c.noise_scale < 0) throw ValidationError("corpus: negative noise scale");
}

void shuffle_indices(std::vector<std::size_t>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
}

}  // namespace

double speaker_base_logf0(int speaker) {
    // roughly 100-180 Hz
    return 4.6 + 0.2 * speaker;
}

int tree_speaker(const UtteranceTree& tree, int speaker_count) {
    int best = 0;
    double best_value = -1.0;
    for (int i = 0; i < speaker_count && i < static_cast<int>(tree.sentence_features.size()); ++i)
        if (tree.sentence_features[i] > best_value) {
            best_value = tree.sentence_features[i];
            best = i;
        }
    return best;
}

UtteranceTree generate_structure(const CorpusConfig& config, const std::string& utterance_id,
                                 int speaker, Rng& rng) {
    UtteranceTree tree;
    tree.utterance_id = utterance_id;

    const int word_count = static_cast<int>(rng.uniform_int(config.min_words, config.max_words));
    tree.sentence_features.assign(config.speaker_count, 0.0);
    tree.sentence_features[speaker] = 1.0;
    const double span = static_cast<double>(config.max_words - config.min_words);
    tree.sentence_features.push_back(span > 0 ? (word_count - config.min_words) / span : 0.0);

    for (int w = 0; w < word_count; ++w) {
        WordNode word;
        word.features = {relative_position(w, word_count), rng.bernoulli(0.3) ? 1.0 : 0.0};
        const int syllable_count =
            static_cast<int>(rng.uniform_int(config.min_syllables, config.max_syllables));
        for (int s = 0; s < syllable_count; ++s) {
            SyllableNode syllable;
            syllable.features = {rng.bernoulli(0.3) ? 1.0 : 0.0};  // stress flag
            const int phone_count =
                static_cast<int>(rng.uniform_int(config.min_phones, config.max_phones));
            for (int p = 0; p < phone_count; ++p) {
                PhoneNode phone;
                phone.features.assign(config.phone_inventory, 0.0);
                phone.features[static_cast<std::size_t>(
                    rng.uniform_int(0, config.phone_inventory - 1))] = 1.0;
                phone.duration_frames =
                    static_cast<int>(rng.uniform_int(config.min_duration, config.max_duration));
                syllable.phones.push_back(std::move(phone));
            }
            word.syllables.push_back(std::move(syllable));
        }
        tree.words.push_back(std::move(word));
    }
    return tree;
}

ProsodicTargets render_targets(const UtteranceTree& tree, const StyleFactor& style,
                               double noise_scale, Rng& rng) {
    const TreeIndex index = positions(tree);
    ProsodicTargets targets;
    targets.durations = tree_durations(index);
    std::size_t total = 0;
    for (int d : targets.durations) total += static_cast<std::size_t>(d);

    // accent envelope: a unit-height cosine arch over each stressed syllable
    std::vector<double> envelope(total, 0.0);
    std::size_t cursor = 0;
    for (std::size_t s = 0; s < index.syllable_count; ++s) {
        std::size_t span = 0;
        for (std::size_t p = index.syllable_phone_begin[s]; p < index.syllable_phone_end[s]; ++p)
            span += static_cast<std::size_t>(targets.durations[p]);
        const bool stressed = !index.syllables[s]->features.empty() &&
                              index.syllables[s]->features[0] > 0.5;
        if (stressed)
            for (std::size_t k = 0; k < span; ++k)
                envelope[cursor + k] =
                    0.5 * (1.0 - std::cos(2.0 * 3.14159265358979323846 *
                                          relative_position(k, span)));
        cursor += span;
    }

    // sentence features are the speaker one-hot followed by the word-count slot
    const int speaker = tree_speaker(tree, static_cast<int>(tree.sentence_features.size()) - 1);
    const double base = speaker_base_logf0(speaker);
    const double accent_gain = 1.0 + 0.5 * style.z_range;

    targets.log_f0.resize(total);
    targets.c0.resize(total);
    for (std::size_t t = 0; t < total; ++t) {
        const double declination = -0.2 * (static_cast<double>(t) / static_cast<double>(total));
        const double bump = 0.25 * envelope[t];
        targets.log_f0[t] = base + declination + 0.3 * style.z_offset + accent_gain * bump +
                            noise_scale * rng.normal();
        targets.c0[t] = 0.5 + 0.3 * envelope[t] + noise_scale * rng.normal();
    }
    return targets;
}

std::vector<CorpusItem> generate(const CorpusConfig& config, std::uint64_t seed, int jobs) {
    check_config(config);
    std::vector<CorpusItem> corpus(config.utterance_count);
    parallel_for(config.utterance_count, jobs, [&](std::size_t i) {
        Rng rng(mix_seed(seed, i));
        const int speaker = static_cast<int>(rng.uniform_int(0, config.speaker_count - 1));
        StyleFactor style;
        style.z_offset = rng.uniform(-1.0, 1.0);
        style.z_range = rng.uniform(-1.0, 1.0);
        CorpusItem& item = corpus[i];
        item.tree = generate_structure(config, utterance_name(i), speaker, rng);
        item.targets = render_targets(item.tree, style, config.noise_scale, rng);
        item.style = style;
    });
    return corpus;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    const std::vector<CorpusItem>& corpus, double train_fraction, std::uint64_t seed) {
    if (corpus.empty()) throw ValidationError("split: empty corpus");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ValidationError("split: train fraction must lie strictly between 0 and 1");
    const std::size_t total =
        static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(corpus.size())));
    if (total == 0 || total == corpus.size())
        throw ValidationError("split: degenerate split sizes for fraction " +
                              std::to_string(train_fraction));

    // stratify by word count
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < corpus.size(); ++i)
        groups[corpus[i].tree.words.size()].push_back(i);

    // largest-remainder quotas so group takes sum to the exact total
    std::vector<std::pair<double, std::size_t>> remainders;  // (-fraction part, group key)
    std::map<std::size_t, std::size_t> quota;
    std::size_t assigned = 0;
    for (const auto& [words, members] : groups) {
        const double share = train_fraction * static_cast<double>(members.size());
        const std::size_t base = static_cast<std::size_t>(std::floor(share));
        quota[words] = std::min(base, members.size());
        assigned += quota[words];
        remainders.emplace_back(-(share - std::floor(share)), words);
    }
    std::sort(remainders.begin(), remainders.end());
    for (const auto& [neg_frac, words] : remainders) {
        if (assigned >= total) break;
        if (quota[words] < groups[words].size()) {
            ++quota[words];
            ++assigned;
        }
    }
    if (assigned != total) {
        for (auto& [words, members] : groups) {
            while (assigned < total && quota[words] < members.size()) {
                ++quota[words];
                ++assigned;
            }
        }
    }

    Rng rng(mix_seed(seed, 0x73706c69));  // "spli" stream
    std::vector<std::size_t> train, eval;
    for (auto& [words, members] : groups) {
        shuffle_indices(members, rng);
        for (std::size_t k = 0; k < members.size(); ++k)
            (k < quota[words] ? train : eval).push_back(members[k]);
    }
    std::sort(train.begin(), train.end());
    std::sort(eval.begin(), eval.end());
    return {std::move(train), std::move(eval)};
}

void write_corpus(const std::string& dir, const std::vector<CorpusItem>& corpus,
                  const CorpusConfig& config, std::uint64_t seed) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create corpus directory " + dir + ": " + ec.message());

    json files;
    json styles;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const std::string name = corpus[i].tree.utterance_id + ".utt.json";
        const std::string path = dir + "/" + name;
        save_utterance(path, corpus[i].tree, &corpus[i].targets);
        files[name] = crc32_hex(crc32_file(path));
        if (corpus[i].style) {
            styles[corpus[i].tree.utterance_id] = {{"z_offset", corpus[i].style->z_offset},
                                                   {"z_range", corpus[i].style->z_range}};
        }
    }
    {
        std::ofstream out(dir + "/styles.json", std::ios::binary);
        if (!out) throw IoError("cannot write styles sidecar in " + dir);
        out << styles.dump(2) << "\n";
    }
    files["styles.json"] = crc32_hex(crc32_file(dir + "/styles.json"));

    json manifest;
    manifest["schema"] = kManifestSchema;
    manifest["seed"] = seed;
    manifest["utterance_count"] = corpus.size();
    manifest["config"] = config_to_json(config);
    manifest["files"] = files;
    std::ofstream out(dir + "/manifest.json", std::ios::binary);
    if (!out) throw IoError("cannot write manifest in " + dir);
    out << manifest.dump(2) << "\n";
    if (!out) throw IoError("manifest write failed in " + dir);
}

LoadedCorpus load_corpus(const std::string& dir, bool verify_checksums) {
    std::ifstream in(dir + "/manifest.json", std::ios::binary);
    if (!in) throw IoError("cannot open corpus manifest in " + dir);
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad corpus manifest: ") + e.what());
    }
    try {
        if (manifest.at("schema").get<std::string>() != kManifestSchema)
            throw ParseError("unknown corpus manifest schema");

        LoadedCorpus loaded;
        loaded.seed = manifest.at("seed").get<std::uint64_t>();
        loaded.config = config_from_json(manifest.at("config"));

        json styles;
        {
            std::ifstream sin(dir + "/styles.json", std::ios::binary);
            if (sin) sin >> styles;
        }

        for (const auto& [name, checksum] : manifest.at("files").items()) {
            if (verify_checksums &&
                crc32_hex(crc32_file(dir + "/" + name)) != checksum.get<std::string>())
                throw ValidationError("corpus file checksum mismatch: " + name);
            if (name == "styles.json") continue;
            auto [tree, targets] = load_utterance(dir + "/" + name);
            CorpusItem item;
            if (!targets) throw ValidationError("corpus utterance lacks targets: " + name);
            item.targets = std::move(*targets);
            if (styles.contains(tree.utterance_id)) {
                StyleFactor style;
                style.z_offset = styles[tree.utterance_id].at("z_offset").get<double>();
                style.z_range = styles[tree.utterance_id].at("z_range").get<double>();
                item.style = style;
            }
            item.tree = std::move(tree);
            loaded.items.push_back(std::move(item));
        }
        std::sort(loaded.items.begin(), loaded.items.end(),
                  [](const CorpusItem& a, const CorpusItem& b) {
                      return a.tree.utterance_id < b.tree.utterance_id;
                  });
        return loaded;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad corpus manifest: ") + e.what());
    }
}

}  // namespace chive
