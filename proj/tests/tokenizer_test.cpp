#include "comedia/error.hpp"
#include "comedia/tokenizer.hpp"

#include "doctest.h"
#include "test_util.hpp"

using namespace comedia;

namespace {

/// Hand-built vocabulary holding {c, a, n, s, d, cans, ##ada, ...}.
Vocab fixture_vocab() {
    Vocab v;
    for (const char* t : {"c", "a", "n", "s", "d", "##a", "##n", "##s", "##d", "cans", "##ada", "dijo", "hola"}) v.add(t);
    return v;
}

std::vector<std::string> pieces(const TokenSeq& seq, const Vocab& v) {
    std::vector<std::string> out;
    for (int id : seq.content()) out.push_back(v.token(id));
    return out;
}

}  // namespace

TEST_SUITE("tokenizer") {

TEST_CASE("specials hold ids 0..3") {
    const Vocab v;
    CHECK(v.size() == kSpecialCount);
    CHECK(v.token(kPadId) == "[PAD]");
    CHECK(v.token(kUnkId) == "[UNK]");
    CHECK(v.token(kNameId) == "[NAME]");
    CHECK(v.token(kMaskId) == "[MASK]");
}

TEST_CASE("first learned merge on a toy corpus") {
    // Pairs per "abab": (a,##b) x2, (##b,##a) x1; two words -> 4 vs 2.
    const auto v = train_bpe({"abab abab"}, 10);
    REQUIRE_FALSE(v.merges().empty());
    CHECK(v.merges().front() == std::pair<std::string, std::string>{"a", "##b"});
    CHECK(v.find("ab"));
}

TEST_CASE("budget equal to specials plus characters gives no merges") {
    // Base pieces: a, ##b, ##a -> 4 + 3.
    const auto v = train_bpe({"abab abab"}, 7);
    CHECK(v.merges().empty());
    CHECK(v.size() == 7);
}

TEST_CASE("ties break lexicographically") {
    // "ab" and "cd" each occur twice; (a,##b) sorts before (c,##d). Base
    // pieces a, ##b, c, ##d plus specials leave room for two merges.
    const auto v = train_bpe({"ab cd ab cd"}, 10);
    REQUIRE(v.merges().size() == 2);
    CHECK(v.merges()[0].first == "a");
    CHECK(v.merges()[1].first == "c");
}

TEST_CASE("stops when no pair repeats") {
    const auto v = train_bpe({"ab cd"}, 100);
    CHECK(v.merges().empty());
}

TEST_CASE("training is deterministic") {
    const std::vector<std::string> texts{"la dama duende de la casa", "la casa con dos puertas", "cansada de la dama"};
    CHECK(train_bpe(texts, 40) == train_bpe(texts, 40));
}

TEST_CASE("specials are never merged") {
    const auto v = train_bpe({"[NAME] dijo [NAME] dijo [NAME] dijo"}, 50);
    for (const auto& [l, r] : v.merges()) {
        CHECK(l.find('[') == std::string::npos);
        CHECK(r.find('[') == std::string::npos);
    }
    const auto seq = encode("[NAME] dijo", v);
    REQUIRE(seq.attention_len >= 2);
    CHECK(seq.ids[0] == kNameId);
    CHECK(decode(seq.content(), v) == "[NAME] dijo");
}

TEST_CASE("empty corpus is an error") {
    try {
        (void)train_bpe({"   ", ""}, 100);
        FAIL("expected EmptyCorpus");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyCorpus);
    }
}

TEST_CASE("greedy longest match with continuation pieces") {
    const auto v = fixture_vocab();
    const auto seq = encode("cansada", v, 8);
    CHECK(pieces(seq, v) == std::vector<std::string>{"cans", "##ada"});
    CHECK(seq.attention_len == 2);
    CHECK(seq.ids.size() == 8);
    for (std::size_t i = 2; i < 8; ++i) CHECK(seq.ids[i] == kPadId);
    CHECK(decode(seq.ids, v) == "cansada");
}

TEST_CASE("unknown characters become UNK") {
    const auto v = fixture_vocab();
    const auto seq = encode("caz", v, 8);
    CHECK(pieces(seq, v) == std::vector<std::string>{"c", "##a", "[UNK]"});
}

TEST_CASE("truncation at max_len") {
    const auto v = fixture_vocab();
    std::string text;
    for (int i = 0; i < 600; ++i) text += "hola ";
    const auto seq = encode(text, v, 512);
    CHECK(seq.ids.size() == 512);
    CHECK(seq.attention_len == 512);
}

TEST_CASE("decode edge cases") {
    const auto v = fixture_vocab();
    CHECK(decode(std::vector<int>(5, kPadId), v).empty());
    try {
        (void)decode(std::vector<int>{999}, v);
        FAIL("expected IdOutOfRange");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::IdOutOfRange);
    }
}

TEST_CASE("round trip for covered text") {
    const std::vector<std::string> texts{"la dama duende de la casa , y la casa con dos puertas"};
    const auto v = train_bpe(texts, 60);
    const std::string text = "  la   casa de\tla dama ";
    CHECK(decode(encode(text, v).content(), v) == "la casa de la dama");
}

TEST_CASE("attention length equals the non-PAD count") {
    const auto v = train_bpe({"uno dos tres cuatro cinco seis siete"}, 40);
    for (std::size_t max_len : {1u, 3u, 10u, 64u}) {
        const auto seq = encode("uno dos tres cuatro cinco", v, max_len);
        CHECK(seq.ids.size() == max_len);
        const auto non_pad = static_cast<std::size_t>(std::count_if(seq.ids.begin(), seq.ids.end(), [](int id) { return id != kPadId; }));
        CHECK(non_pad == seq.attention_len);
    }
}

TEST_CASE("vocabulary files round-trip") {
    const auto v = train_bpe({"la dama duende de la casa con dos puertas"}, 40);
    testutil::TempDir dir("vocab");
    v.save(dir.path());
    const auto back = Vocab::load(dir.path());
    CHECK(back == v);
    CHECK(back.digest() == v.digest());
    const auto header = read_file(dir / "vocab.txt");
    CHECK(header.rfind("comedia-bpe-vocab 1 ", 0) == 0);
}

}
