#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "chive/corpus.hpp"
#include "chive/tree.hpp"
#include "test_util.hpp"

using namespace chive;
using chive_test::simple_tree;
using chive_test::simple_targets;

namespace {

bool mentions(const ValidationReport& report, const std::string& needle) {
    return std::any_of(report.violations.begin(), report.violations.end(),
                       [&](const std::string& v) { return v.find(needle) != std::string::npos; });
}

}  // namespace

TEST_CASE("validate flags an empty word") {
    UtteranceTree tree = simple_tree({{1}});
    tree.words.push_back(WordNode{{0.5, 0.0}, {}});
    const ValidationReport report = validate(tree);
    CHECK_FALSE(report.ok());
    CHECK(mentions(report, "empty word"));
}

TEST_CASE("validate accepts the two-word shape with consistent targets") {
    // first syllable two phones, second syllable one phone
    const UtteranceTree tree = simple_tree({{2}, {1}});
    const ProsodicTargets targets = simple_targets(tree);
    CHECK(validate(tree, &targets).ok());
}

TEST_CASE("validate flags frame count vs duration sum mismatch") {
    const UtteranceTree tree = simple_tree({{2}}, {3, 2, 1, 4}, {2, 4});
    ProsodicTargets targets;
    targets.durations = {2, 4};
    targets.log_f0.assign(5, 5.0);  // needs 6
    targets.c0.assign(5, 0.5);
    const ValidationReport report = validate(tree, &targets);
    CHECK_FALSE(report.ok());
    CHECK(mentions(report, "T != sum(durations)"));
}

TEST_CASE("validate flags empty syllables and non-positive durations") {
    UtteranceTree tree = simple_tree({{1}});
    tree.words[0].syllables.push_back(SyllableNode{{1.0}, {}});
    CHECK(mentions(validate(tree), "empty syllable"));

    UtteranceTree bad = simple_tree({{1}});
    bad.words[0].syllables[0].phones[0].duration_frames = 0;
    CHECK(mentions(validate(bad), "non-positive duration"));
}

TEST_CASE("timing signal matches the coarse-coding formula") {
    SUBCASE("position 0 puts the bump on the first component") {
        const auto v = timing_signal(0.0, 3);
        CHECK(v[0] == doctest::Approx(1.0));
        CHECK(v[2] == doctest::Approx(0.0));
    }
    SUBCASE("position 1 puts the bump on the last component for any dim") {
        for (int dim : {2, 3, 4, 5, 64})
            CHECK(timing_signal(1.0, dim).back() == doctest::Approx(1.0));
    }
    SUBCASE("midpoint of a 3-dim code") {
        const auto v = timing_signal(0.5, 3);
        CHECK(v[0] == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(v[1] == doctest::Approx(1.0));
        CHECK(v[2] == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("out-of-range position and tiny dim are input errors") {
        CHECK_THROWS_AS(timing_signal(-0.1, 3), std::invalid_argument);
        CHECK_THROWS_AS(timing_signal(1.1, 3), std::invalid_argument);
        CHECK_THROWS_AS(timing_signal(0.5, 1), std::invalid_argument);
    }
}

TEST_CASE("timing signal components stay in [0,1] and the peak moves monotonically") {
    for (int dim : {2, 3, 4, 64}) {
        std::size_t last_peak = 0;
        for (int i = 0; i <= 100; ++i) {
            const double pos = i / 100.0;
            const auto v = timing_signal(pos, dim);
            std::size_t peak = 0;
            for (std::size_t j = 0; j < v.size(); ++j) {
                CHECK(v[j] >= 0.0);
                CHECK(v[j] <= 1.0);
                if (v[j] > v[peak]) peak = j;
            }
            CHECK(peak >= last_peak);
            last_peak = peak;
        }
    }
}

TEST_CASE("relative positions follow the linear rule with a degenerate case") {
    CHECK(relative_position(0, 1) == 0.0);
    CHECK(relative_position(0, 3) == 0.0);
    CHECK(relative_position(1, 3) == doctest::Approx(0.5));
    CHECK(relative_position(2, 3) == doctest::Approx(1.0));
    CHECK(relative_position(1, 4) == doctest::Approx(1.0 / 3.0));
    CHECK(relative_position(2, 4) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("positions flattens the hierarchy in order") {
    const UtteranceTree tree = simple_tree({{2, 1}, {1}});
    const TreeIndex index = positions(tree);
    CHECK(index.word_count == 2);
    CHECK(index.syllable_count == 3);
    CHECK(index.phone_count == 4);
    CHECK(index.word_position == std::vector<double>{0.0, 1.0});
    CHECK(index.syllable_word == std::vector<std::size_t>{0, 0, 1});
    CHECK(index.syllable_position[0] == 0.0);
    CHECK(index.syllable_position[1] == 1.0);
    CHECK(index.syllable_position[2] == 0.0);
    CHECK(index.phone_position[0] == 0.0);
    CHECK(index.phone_position[1] == 1.0);
    CHECK(index.phones_in_syllable(0) == 2);
    CHECK(index.phones_in_syllable(2) == 1);
}

TEST_CASE("serialization round-trips trees with and without targets") {
    const UtteranceTree tree = simple_tree({{2}, {1}});
    const ProsodicTargets targets = simple_targets(tree);

    SUBCASE("with targets") {
        const std::string text = serialize(tree, &targets);
        auto [back, back_targets] = deserialize(text);
        REQUIRE(back_targets.has_value());
        CHECK(serialize(back, &*back_targets) == text);
    }
    SUBCASE("without targets the document deserializes with targets absent") {
        const std::string text = serialize(tree);
        auto [back, back_targets] = deserialize(text);
        CHECK_FALSE(back_targets.has_value());
        CHECK(back.utterance_id == tree.utterance_id);
        CHECK(back.words.size() == tree.words.size());
    }
}

TEST_CASE("deserialize rejects bad documents") {
    const UtteranceTree tree = simple_tree({{1}});
    const std::string text = serialize(tree);
    CHECK_THROWS_AS(deserialize(text.substr(0, text.size() / 2)), ParseError);
    CHECK_THROWS_AS(deserialize("{}"), ParseError);

    std::string wrong = text;
    const auto at = wrong.find("chive-utterance/1");
    wrong.replace(at, std::string("chive-utterance/1").size(), "chive-utterance/9");
    CHECK_THROWS_AS(deserialize(wrong), ParseError);
}

TEST_CASE("round trip is the identity across a generated corpus") {
    const auto corpus = generate(chive_test::tiny_corpus_config(), 42);
    for (const CorpusItem& item : corpus) {
        CHECK(validate(item.tree, &item.targets).ok());
        const std::string text = serialize(item.tree, &item.targets);
        auto [tree, targets] = deserialize(text);
        REQUIRE(targets.has_value());
        CHECK(serialize(tree, &*targets) == text);
    }
}
