#include "comedia/dataset.hpp"
#include "comedia/error.hpp"

#include "doctest.h"
#include "oracles.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <numeric>

using namespace comedia;

namespace {

std::vector<Play> fixture_corpus() {
    return load_corpus(testutil::data_dir() / "corpus", SegmentationRules::defaults());
}

Utterance utt(const std::string& who, const std::string& text, int act, int scene) {
    return {who, text, act, scene, count_words(text)};
}

/// Two characters, three scenes, seven utterances; scene pairs with speech:
/// s1 {a, b}, s2 {a, b}, s3 {a}.
Play scene_fixture() {
    Play play;
    play.play_name = "p";
    play.cast = {{"a", {"Ana"}, Gender::Female, ""}, {"b", {"Blas"}, Gender::Male, ""}};
    Act act;
    act.index = 1;
    act.utterances = {utt("a", "uno dos", 1, 1),   utt("b", "tres", 1, 1),        utt("a", "cuatro", 1, 1),
                      utt("b", "cinco seis", 1, 2), utt("a", "siete", 1, 2),      utt("a", "ocho nueve", 1, 3),
                      utt("a", "diez", 1, 3)};
    act.scenes = {{1, 1, 0, 3, {"a", "b"}}, {1, 2, 3, 5, {"a", "b"}}, {1, 3, 5, 7, {"a"}}};
    play.acts.push_back(act);
    return play;
}

std::vector<EligibleCharacter> all_eligible(const std::vector<Play>& corpus) { return filter_characters(corpus, 0); }

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("name list: union of display names") {
    Play p;
    p.cast = {{"rosaura", {"Rosaura"}, Gender::Female, ""}, {"segismundo", {"Segismundo"}, Gender::Male, ""}};
    CHECK(build_name_mask_list({p}) == std::set<std::string>{"Rosaura", "Segismundo"});
    Play q = p, r;
    q.cast = {{"juan", {"Don Juan"}, Gender::Male, ""}};
    r.cast = {{"juan", {"Don Juan", "DON JUAN"}, Gender::Male, ""}};
    CHECK(build_name_mask_list({q, r}) == std::set<std::string>{"DON JUAN", "Don Juan"});
}

TEST_CASE("name list on the fixture corpus") {
    // Federico, Laura, Becoquín, Coro, Don Juan, Doña Inés, Criado, Rosaura,
    // Clotaldo, Clarín.
    CHECK(build_name_mask_list(fixture_corpus()).size() == 10);
}

TEST_CASE("masking: names first, then single-play words") {
    Play a, b;
    a.play_name = "a";
    b.play_name = "b";
    a.cast = {{"rosaura", {"Rosaura"}, Gender::Female, ""}};
    Act act_a{1, {utt("rosaura", "Rosaura, espera a Becoquín", 1, 0)}, {}, {}};
    Act act_b{1, {utt("x", "espera a Rosaura", 1, 0), utt("x", ", a", 1, 0)}, {}, {}};
    a.acts.push_back(act_a);
    b.acts.push_back(act_b);
    const auto [masked, report] = mask_corpus({a, b}, build_name_mask_list({a, b}));
    CHECK(masked[0].acts[0].utterances[0].text == "[NAME] , espera a [MASK]");
    CHECK(masked[1].acts[0].utterances[0].text == "espera a [NAME]");
    CHECK(report.single_play_tokens == std::set<std::string>{"Becoquín"});
    CHECK(report.replacement_counts.at("Rosaura") == 2);
    CHECK(report.replacement_counts.at("Becoquín") == 1);
    // Word counts keep their parse-time values.
    CHECK(masked[0].acts[0].utterances[0].word_count == 4);
}

TEST_CASE("masking is case-sensitive and whole-word") {
    Play a, b;
    a.play_name = "a";
    b.play_name = "b";
    a.cast = {{"flor", {"Flor"}, Gender::Female, ""}};
    a.acts.push_back({1, {utt("flor", "la flor y Flor y Florinda", 1, 0)}, {}, {}});
    b.acts.push_back({1, {utt("x", "la flor y y Florinda", 1, 0)}, {}, {}});
    const auto [masked, report] = mask_corpus({a, b}, {"Flor"});
    CHECK(masked[0].acts[0].utterances[0].text == "la flor y [NAME] y Florinda");
    CHECK(report.single_play_tokens.empty());
}

TEST_CASE("masking invariants on the fixture corpus") {
    const auto corpus = fixture_corpus();
    const auto [masked, report] = mask_corpus(corpus, build_name_mask_list(corpus));
    CHECK(oracle::single_play_types(masked).empty());
    CHECK(oracle::surviving_names(corpus, masked).empty());
    CHECK(report.single_play_tokens.count("zarabanda") == 1);
    CHECK(report.masked_names.size() == 10);
}

TEST_CASE("character filter") {
    const auto eligible = filter_characters(fixture_corpus(), 30);
    std::vector<std::string> ids;
    for (const auto& e : eligible) ids.push_back(e.key.str());
    // Becoquín (29 words), the choir (no gender), the servant (11) and the
    // unlisted speaker are out; Don Juan (exactly 30) is in.
    CHECK(ids == std::vector<std::string>{"comedia-a/federico", "comedia-a/laura", "comedia-b/juan", "comedia-b/ines",
                                          "comedia-c/rosaura", "comedia-c/clotaldo", "comedia-c/clarin"});
    CHECK(filter_characters(fixture_corpus(), 31).size() == 6);
}

TEST_CASE("documents at three granularities from a hand-counted play") {
    const std::vector<Play> corpus{scene_fixture()};
    const auto eligible = all_eligible(corpus);
    const auto utts = make_documents(corpus, eligible, Granularity::Utterance);
    const auto scenes = make_documents(corpus, eligible, Granularity::Scene);
    const auto chars = make_documents(corpus, eligible, Granularity::Character);
    CHECK(utts.size() == 7);
    CHECK(scenes.size() == 5);
    REQUIRE(chars.size() == 2);
    CHECK(chars[0].text == "uno dos cuatro siete ocho nueve diez");
    CHECK(chars[0].act == 0);
    CHECK(chars[0].scene == 0);
    const auto a_scenes = std::count_if(scenes.begin(), scenes.end(), [](const Document& d) { return d.char_id == "a"; });
    CHECK(a_scenes == 3);
    // Word totals are conserved under regrouping.
    auto total = [](const std::vector<Document>& docs) {
        return std::accumulate(docs.begin(), docs.end(), std::size_t{0},
                               [](std::size_t s, const Document& d) { return s + d.word_count; });
    };
    CHECK(total(utts) == total(chars));
    CHECK(total(scenes) == total(chars));
}

TEST_CASE("fixture corpus document counts") {
    const auto corpus = fixture_corpus();
    const auto eligible = filter_characters(corpus, 30);
    CHECK(make_documents(corpus, eligible, Granularity::Character).size() == 7);
    CHECK(make_documents(corpus, eligible, Granularity::Scene).size() == 15);
    CHECK(make_documents(corpus, eligible, Granularity::Utterance).size() == 19);
}

TEST_CASE("split sizes") {
    CHECK(split_sizes(1515, {}) == std::array<std::size_t, 3>{1212, 151, 152});
    CHECK(split_sizes(10, {}) == std::array<std::size_t, 3>{8, 1, 1});
    CHECK(split_sizes(7, {}) == std::array<std::size_t, 3>{5, 0, 2});
    CHECK(split_sizes(0, {}) == std::array<std::size_t, 3>{0, 0, 0});
}

TEST_CASE("split is seeded, disjoint and exhaustive") {
    std::vector<CharKey> keys;
    for (int i = 0; i < 50; ++i) keys.push_back({"p" + std::to_string(i % 5), "c" + std::to_string(i)});
    const auto a = split_characters(keys, 42);
    const auto b = split_characters(keys, 42);
    const auto c = split_characters(keys, 43);
    CHECK(a.assignment == b.assignment);
    CHECK(a.assignment != c.assignment);
    CHECK(a.assignment.size() == 50);
    CHECK(a.sizes() == std::array<std::size_t, 3>{40, 5, 5});
    for (const auto& k : keys) CHECK(a.assignment.count(k) == 1);
    CHECK(SplitSpec::from_json(a.to_json()).assignment == a.assignment);
}

TEST_CASE("pinned characters land in validation without resizing") {
    std::vector<CharKey> keys;
    for (int i = 0; i < 20; ++i) keys.push_back({"p", "c" + std::to_string(i)});
    const std::set<CharKey> pinned{{"p", "c3"}, {"p", "c7"}};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto s = split_characters(keys, seed, {}, pinned);
        CHECK(s.partition_of({"p", "c3"}) == Partition::Validation);
        CHECK(s.partition_of({"p", "c7"}) == Partition::Validation);
        CHECK(s.sizes() == std::array<std::size_t, 3>{16, 2, 2});
    }
}

TEST_CASE("ratios must sum to one") {
    try {
        (void)split_characters({{"p", "a"}}, 1, {0.5, 0.3, 0.1});
        FAIL("expected RatiosNotNormalized");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::RatiosNotNormalized);
    }
}

TEST_CASE("corpus statistics") {
    const auto stats = corpus_stats(filter_characters(fixture_corpus(), 30));
    CHECK(stats.characters == 7);
    CHECK(stats.male.count == 4);
    CHECK(stats.female.count == 3);
    CHECK(stats.male.mean_words == doctest::Approx(33.75));
    CHECK(stats.male.min_words == 30);
    CHECK(stats.male.max_words == 40);
    CHECK(stats.female.mean_words == doctest::Approx(37.0));
    CHECK(stats.female.min_words == 31);
    CHECK(stats.female.max_words == 45);

    EligibleCharacter one{{"p", "x"}, {"x", {"X"}, Gender::Male, ""}, 40};
    const auto single = corpus_stats({one});
    CHECK(single.male.mean_words == 40.0);
    CHECK(single.male.min_words == 40);
    CHECK(single.male.max_words == 40);

    testutil::WarningCapture warnings;
    const auto empty = corpus_stats({});
    CHECK(empty.characters == 0);
    CHECK(empty.male.mean_words == 0.0);
    CHECK(warnings.messages.size() == 1);
}

TEST_CASE("partitions are constant per character across granularities") {
    PrepareOptions opt;
    opt.seed = 3;
    const auto prepared = prepare_corpus(fixture_corpus(), opt);
    for (auto g : {Granularity::Utterance, Granularity::Scene, Granularity::Character}) {
        for (auto p : {Partition::Train, Partition::Test, Partition::Validation}) {
            for (const auto& d : prepared.documents(g, p)) CHECK(prepared.split.partition_of(d.key()) == p);
        }
    }
}

TEST_CASE("prepared files round-trip") {
    PrepareOptions opt;
    opt.seed = 5;
    const auto prepared = prepare_corpus(fixture_corpus(), opt);
    testutil::TempDir dir("prep");
    write_prepared(prepared, {Granularity::Character, Granularity::Utterance}, dir.path());
    const auto docs = read_documents(dataset_file(dir.path(), Granularity::Utterance, Partition::Train));
    const auto expected = prepared.documents(Granularity::Utterance, Partition::Train);
    REQUIRE(docs.size() == expected.size());
    for (std::size_t i = 0; i < docs.size(); ++i) CHECK(to_json(docs[i]) == to_json(expected[i]));
    CHECK(std::filesystem::exists(dir / "split.json"));
    CHECK(std::filesystem::exists(dir / "mask_report.json"));
    CHECK(std::filesystem::exists(dir / "masked/comedia-a.json"));
}

}
