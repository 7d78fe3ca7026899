#include "comedia/attribution.hpp"
#include "comedia/error.hpp"
#include "comedia/rng.hpp"

#include "doctest.h"
#include "test_util.hpp"

#include <cmath>
#include <map>

using namespace comedia;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    Matrix m(r, c);
    for (auto& x : m.data) x = rng.uniform(-scale, scale);
    return m;
}

Hyper small_hyper(std::size_t vocab) {
    Hyper h;
    h.vocab_size = vocab;
    h.embed_dim = 6;
    h.hidden_dim = 5;
    h.max_len = 16;
    return h;
}

/// Weights large enough that tanh is far from linear.
Params wide_params(const Hyper& h, std::uint64_t seed) {
    auto p = init_params(h, seed);
    p.for_each_array([](std::span<double> a) {
        for (auto& x : a) x *= 30;
    });
    return p;
}

TokenSeq seq_of(std::vector<int> content, std::size_t max_len = 16) {
    TokenSeq s;
    s.attention_len = content.size();
    s.ids = std::move(content);
    s.ids.resize(max_len, kPadId);
    return s;
}

}  // namespace

TEST_SUITE("attribution") {

TEST_CASE("linear surrogate: exact at any step count") {
    Rng rng(1);
    const auto w = random_matrix(4, 3, rng);
    const auto x = random_matrix(4, 3, rng);
    const Matrix zero(4, 3);
    const LinearScore f(w);
    for (std::size_t m : {1u, 2u, 7u, 128u}) {
        const auto ig = integrated_gradients(f, x, zero, m);
        for (std::size_t i = 0; i < x.data.size(); ++i) CHECK(ig.data[i] == doctest::Approx(w.data[i] * x.data[i]).epsilon(1e-14));
        CHECK(completeness_gap(f, x, zero, ig) < 1e-12);
    }
}

TEST_CASE("identical input and baseline give zero attributions") {
    const auto h = small_hyper(10);
    const auto p = wide_params(h, 2);
    const auto x = embed(p, seq_of({3, 4, 5}));
    const ModelScore f(p);
    const auto ig = integrated_gradients(f, x, x, 64);
    for (double v : ig.data) CHECK(v == 0.0);
    CHECK(completeness_gap(f, x, x, ig) == 0.0);
}

TEST_CASE("baselines") {
    const auto h = small_hyper(10);
    const auto p = wide_params(h, 2);
    const auto seq = seq_of({3, 4});
    CHECK(baseline_for(p, seq, Baseline::AllPad) == Matrix(2, h.embed_dim));
    CHECK(baseline_for(p, seq, Baseline::ZeroEmbedding) == Matrix(2, h.embed_dim));
    CHECK(parse_baseline("all-pad") == Baseline::AllPad);
    CHECK(parse_baseline("zero") == Baseline::ZeroEmbedding);
    CHECK_FALSE(parse_baseline("mean"));
    IGConfig bad;
    bad.steps = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("model score gradient matches finite differences") {
    const auto h = small_hyper(10);
    const auto p = wide_params(h, 5);
    const ModelScore f(p);
    const auto x = embed(p, seq_of({1, 7, 2}));
    const auto g = f.gradient(x);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        Matrix up = x, down = x;
        up.data[i] += 1e-6;
        down.data[i] -= 1e-6;
        const double numeric = (f.value(up) - f.value(down)) / 2e-6;
        CHECK(g.data[i] == doctest::Approx(numeric).epsilon(1e-5).scale(1.0));
    }
}

TEST_CASE("more steps shrink the completeness gap") {
    const auto h = small_hyper(30);
    const auto p = wide_params(h, 7);
    Rng rng(3);
    std::size_t decreased = 0;
    const std::size_t n = 20;
    IGConfig one{1, Baseline::AllPad};
    IGConfig many{256, Baseline::AllPad};
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<int> ids;
        const std::size_t len = 1 + rng.uniform_index(8);
        for (std::size_t k = 0; k < len; ++k) ids.push_back(1 + static_cast<int>(rng.uniform_index(29)));
        const auto seq = seq_of(ids);
        if (completeness_gap(p, seq, many) < completeness_gap(p, seq, one)) ++decreased;
    }
    CHECK(decreased > n / 2);
}

TEST_CASE("token attributions sum to the score difference") {
    const auto h = small_hyper(12);
    const auto p = wide_params(h, 9);
    const auto seq = seq_of({4, 5, 6, 4});
    const IGConfig cfg{512, Baseline::AllPad};
    const auto attrs = integrated_gradients(p, seq, cfg, nullptr, "doc");
    REQUIRE(attrs.size() == 4);
    double sum = 0.0;
    for (std::size_t i = 0; i < attrs.size(); ++i) {
        CHECK(attrs[i].position == i);
        CHECK(attrs[i].doc_id == "doc");
        sum += attrs[i].score;
    }
    CHECK(attrs[0].token == "4");
    const ModelScore f(p);
    const double delta = f.value(embed(p, seq)) - f.value(baseline_for(p, seq, Baseline::AllPad));
    CHECK(std::abs(sum - delta) == doctest::Approx(completeness_gap(p, seq, cfg)).epsilon(1e-9));
    // Logit difference, not probability.
    const auto pred = forward(p, seq);
    CHECK(f.value(embed(p, seq)) == doctest::Approx(pred.logits[0] - pred.logits[1]).epsilon(1e-12));
}

TEST_CASE("large scores keep their sign as steps grow") {
    const auto h = small_hyper(12);
    const auto p = wide_params(h, 13);
    const auto seq = seq_of({1, 2, 3, 4, 5, 6});
    const auto coarse = integrated_gradients(p, seq, {64, Baseline::AllPad});
    const auto fine = integrated_gradients(p, seq, {512, Baseline::AllPad});
    const double gap = completeness_gap(p, seq, {64, Baseline::AllPad});
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        if (std::abs(coarse[i].score) > 10 * gap) CHECK(std::signbit(coarse[i].score) == std::signbit(fine[i].score));
    }
}

TEST_CASE("table means") {
    AttributionTable t;
    t.add("sola", -0.8);
    t.add("espada", 0.2);
    t.add("espada", 0.4);
    CHECK(t.rows.at("sola").mean_score == -0.8);
    CHECK(t.rows.at("sola").n == 1);
    CHECK(t.rows.at("espada").mean_score == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(t.rows.at("espada").n == 2);
}

TEST_CASE("corpus aggregation: brute-force means, PAD excluded, thread-independent") {
    Vocab v;
    for (const char* s : {"espada", "casa", "y", "de"}) v.add(s);
    const auto h = small_hyper(v.size());
    const auto p = wide_params(h, 21);
    std::vector<Document> docs;
    for (const char* text : {"espada y casa", "[NAME] de casa casa", "y y espada", "de"}) {
        Document d;
        d.doc_id = "d" + std::to_string(docs.size());
        d.text = text;
        docs.push_back(d);
    }
    const IGConfig cfg{32, Baseline::AllPad};
    std::vector<DocumentAttribution> per_doc;
    const auto table = aggregate_token_attributions(p, v, docs, cfg, 16, &per_doc, 1);
    const auto threaded = aggregate_token_attributions(p, v, docs, cfg, 16, nullptr, 4);
    REQUIRE(per_doc.size() == docs.size());
    std::map<std::string, std::vector<double>> occurrences;
    for (const auto& d : per_doc) {
        for (const auto& t : d.tokens) occurrences[t.token].push_back(t.score);
    }
    CHECK(occurrences.count("[PAD]") == 0);
    CHECK(occurrences.count("[NAME]") == 1);
    REQUIRE(table.rows.size() == occurrences.size());
    for (const auto& [token, scores] : occurrences) {
        double s = 0.0;
        for (double x : scores) s += x;
        CHECK(table.rows.at(token).n == scores.size());
        CHECK(table.rows.at(token).mean_score == s / static_cast<double>(scores.size()));
        CHECK(threaded.rows.at(token).mean_score == table.rows.at(token).mean_score);
    }
}

TEST_CASE("polarized lists") {
    AttributionTable t;
    t.add("a", 0.5);
    t.add("b", -0.6);
    t.add("c", 0.1);
    const auto top = top_polarized(t, 1);
    REQUIRE(top.masculine.size() == 1);
    CHECK(top.masculine[0].token == "a");
    CHECK(top.feminine[0].token == "b");
    CHECK_FALSE(top.truncated);
    CHECK_FALSE(top.degenerate);

    const auto all = top_polarized(t, 20);
    CHECK(all.truncated);
    CHECK(all.masculine.size() == 3);
    CHECK(all.masculine[2].token == "b");

    AttributionTable zeros;
    for (const char* s : {"zeta", "alfa", "beta"}) zeros.add(s, 0.0);
    const auto flat = top_polarized(zeros, 2);
    CHECK(flat.degenerate);
    CHECK(flat.masculine[0].token == "alfa");
    CHECK(flat.masculine[1].token == "beta");
    CHECK(flat.feminine[0].token == "alfa");

    try {
        (void)top_polarized(AttributionTable{}, 5);
        FAIL("expected EmptyInput");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyInput);
    }
    const auto text = format_polarized(top);
    CHECK(text.find("masculine") != std::string::npos);
    CHECK(text.find("0.5000") != std::string::npos);
}

TEST_CASE("table and dump files round-trip") {
    testutil::TempDir dir("attr");
    AttributionTable t;
    t.add("ventana", -0.123456789012345);
    t.add("guerra, y", 0.5);
    write_table_csv(t, dir / "table.csv");
    const auto back = read_table_csv(dir / "table.csv");
    CHECK(back.rows.at("ventana").mean_score == t.rows.at("ventana").mean_score);
    CHECK(back.rows.at("guerra, y").n == 1);

    DocumentAttribution d;
    d.doc_id = "x";
    d.gold = Gender::Female;
    d.prediction = prediction_from_probs(0.3, 0.7);
    d.tokens = {{"x", 0, "casa", -0.25}, {"x", 1, "##s", 0.125}};
    d.completeness_gap = 1e-6;
    write_attributions_jsonl({d}, dir / "a.jsonl");
    const auto docs = read_attributions_jsonl(dir / "a.jsonl");
    REQUIRE(docs.size() == 1);
    CHECK(docs[0].tokens.size() == 2);
    CHECK(docs[0].tokens[1].token == "##s");
    CHECK(docs[0].gold == Gender::Female);

    auto j = d.to_json();
    j["scores"].erase(j["scores"].begin());
    CHECK_THROWS_AS(DocumentAttribution::from_json(j), Error);
}

}
