#include "comedia/error.hpp"
#include "comedia/tei_parser.hpp"

#include "doctest.h"
#include "test_util.hpp"

#include <algorithm>
#include <map>

using namespace comedia;
using testutil::data_file;

namespace {

std::vector<std::size_t> scene_sizes(const Act& act) {
    std::vector<std::size_t> out;
    for (const auto& s : act.scenes) out.push_back(s.utterance_end - s.utterance_begin);
    return out;
}

}  // namespace

TEST_SUITE("tei_parser") {

TEST_CASE("minimal play: two speeches of three words") {
    const auto play = parse_play(data_file("tei/minimal.xml"));
    CHECK(play.play_name == "minimal");
    CHECK(play.title == "Mínima");
    REQUIRE(play.cast.size() == 1);
    CHECK(play.cast[0].gender == Gender::Female);
    REQUIRE(play.acts.size() == 1);
    const auto& utts = play.acts[0].utterances;
    REQUIRE(utts.size() == 2);
    CHECK(utts[0].word_count == 3);
    CHECK(utts[1].word_count == 3);
    // Verse lines of one speech are joined by single spaces.
    CHECK(utts[1].text == "adiós hasta luego");
    CHECK(utts[0].scene == 0);
}

TEST_CASE("choir without a sex attribute is Undefined") {
    const auto play = parse_play(data_file("tei/coro.xml"));
    REQUIRE(play.find_character("coro"));
    CHECK(play.find_character("coro")->gender == Gender::Undefined);
    CHECK(play.find_character("musicos")->gender == Gender::Undefined);
    CHECK(play.find_character("rey")->gender == Gender::Male);
    CHECK(play.find_character("reina")->gender == Gender::Female);
}

TEST_CASE("gender mapping is total") {
    CHECK(gender_from_annotation("MALE") == Gender::Male);
    CHECK(gender_from_annotation("female") == Gender::Female);
    CHECK(gender_from_annotation("UNKNOWN") == Gender::Undefined);
    CHECK(gender_from_annotation("") == Gender::Undefined);
}

TEST_CASE("fixture play with a cross-dressing heroine") {
    const auto play = parse_play(data_file("corpus/comedia-c.xml"));
    const auto* rosaura = play.find_character("rosaura");
    REQUIRE(rosaura);
    CHECK(rosaura->gender == Gender::Female);
    CHECK(rosaura->display_names == std::vector<std::string>{"Rosaura"});
    CHECK(word_count(*rosaura, play) == 45);
    CHECK(word_count("clotaldo", play) == 32);
}

TEST_CASE("word_count: direct counts and errors") {
    Play play;
    play.cast = {{"a", {"A"}, Gender::Male, ""}, {"b", {"B"}, Gender::Female, ""}};
    Act act;
    act.index = 1;
    act.utterances = {{"a", "hola", 1, 0, 1}, {"a", "buenos días señor", 1, 0, 3}};
    play.acts.push_back(act);
    CHECK(word_count("a", play) == 4);
    CHECK(word_count("b", play) == 0);
    try {
        (void)word_count("zz", play);
        FAIL("expected UnknownCharacter");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnknownCharacter);
    }
}

TEST_CASE("parse errors") {
    try {
        (void)parse_play("<TEI><unclosed>");
        FAIL("expected XmlParse");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::XmlParse);
    }
    try {
        (void)parse_play(data_file("tei/no_cast.xml"));
        FAIL("expected MissingCastList");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MissingCastList);
    }
}

TEST_CASE("unresolved speakers are kept and flagged") {
    const auto play = parse_play(data_file("corpus/comedia-b.xml"));
    CHECK(play.unresolved_speakers == std::set<std::string>{"tadeo"});
    CHECK_FALSE(play.is_resolved("tadeo"));
    CHECK(play.is_resolved("juan"));
}

TEST_CASE("scene cues") {
    const auto rules = SegmentationRules::defaults();
    CHECK(opens_scene("Vase Blas.", rules));
    CHECK(opens_scene("ÉNTRANSE los dos", rules));
    CHECK(opens_scene("Salen Federico y Becoquín", rules));
    CHECK_FALSE(opens_scene("Salero en la mesa.", rules));
    CHECK_FALSE(opens_scene("Dentro ruido.", rules));
    SegmentationRules custom = rules;
    custom.patterns.push_back("^dentro");
    CHECK(opens_scene("Dentro ruido.", custom));
}

TEST_CASE("segmentation of the hand-built scene fixture") {
    const auto play = segment_scenes(parse_play(data_file("tei/vase.xml")), SegmentationRules::defaults());
    REQUIRE(play.acts.size() == 4);
    // "Vase" between utterances 5 and 6; the non-cue direction adds no boundary.
    CHECK(scene_sizes(play.acts[0]) == std::vector<std::size_t>{5, 2});
    CHECK(play.acts[0].utterances[4].scene == 1);
    CHECK(play.acts[0].utterances[5].scene == 2);
    // No directions: one scene.
    CHECK(scene_sizes(play.acts[1]) == std::vector<std::size_t>{3});
    // Three interleaved cues: four scenes.
    CHECK(scene_sizes(play.acts[2]) == std::vector<std::size_t>{1, 2, 1, 1});
    // Back-to-back cues collapse into one boundary.
    CHECK(scene_sizes(play.acts[3]) == std::vector<std::size_t>{1, 2});
}

TEST_CASE("scene partition and speaker sets are self-consistent") {
    for (const char* file : {"tei/vase.xml", "corpus/comedia-a.xml", "corpus/comedia-b.xml", "corpus/comedia-c.xml"}) {
        const auto play = segment_scenes(parse_play(data_file(file)), SegmentationRules::defaults());
        for (const auto& act : play.acts) {
            REQUIRE_FALSE(act.scenes.empty());
            std::size_t next = 0;
            for (std::size_t i = 0; i < act.scenes.size(); ++i) {
                const auto& s = act.scenes[i];
                CHECK(s.index == static_cast<int>(i + 1));
                CHECK(s.act == act.index);
                CHECK(s.utterance_begin == next);
                CHECK(s.utterance_end > s.utterance_begin);
                next = s.utterance_end;
                std::set<std::string> speakers;
                for (std::size_t u = s.utterance_begin; u < s.utterance_end; ++u) {
                    speakers.insert(act.utterances[u].speaker_id);
                    CHECK(act.utterances[u].scene == s.index);
                }
                CHECK(speakers == s.speakers);
            }
            CHECK(next == act.utterances.size());
        }
    }
}

TEST_CASE("parsing is deterministic and JSON round-trips") {
    const auto text = data_file("corpus/comedia-a.xml");
    const auto a = segment_scenes(parse_play(text), SegmentationRules::defaults());
    const auto b = segment_scenes(parse_play(text), SegmentationRules::defaults());
    CHECK(to_json(a) == to_json(b));
    CHECK(to_json(play_from_json(to_json(a))) == to_json(a));
}

TEST_CASE("custom rules file") {
    testutil::TempDir dir("rules");
    atomic_write(dir / "rules.json", R"({"cues": ["dentro"], "replace_default_cues": true})");
    const auto rules = SegmentationRules::load(dir / "rules.json");
    CHECK(opens_scene("Dentro ruido.", rules));
    CHECK_FALSE(opens_scene("Vase Blas.", rules));
}

TEST_CASE("load_corpus reads a directory sorted by stem") {
    const auto plays = load_corpus(testutil::data_dir() / "corpus", SegmentationRules::defaults());
    REQUIRE(plays.size() == 3);
    CHECK(plays[0].play_name == "comedia-a");
    CHECK(plays[2].play_name == "comedia-c");
    CHECK(read_tei_title(data_file("corpus/comedia-b.xml")) == "Comedia de prueba B");
}

}
