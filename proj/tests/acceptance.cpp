// Acceptance checks. Prints one line per criterion:
//   CRITERION <n> PASS|FAIL|SKIP  <what was measured>
// Parts that need the real Calderón corpus run only when COMEDIA_CALDRACOR_DIR
// names a directory of its TEI files; otherwise they are reported as skipped
// on the same line. Exit status is nonzero when any criterion fails.

#include "comedia/aggregate_eval.hpp"
#include "comedia/attribution.hpp"
#include "comedia/dataset.hpp"
#include "comedia/error.hpp"
#include "comedia/fsutil.hpp"
#include "comedia/model.hpp"
#include "comedia/pipeline.hpp"
#include "comedia/prediction.hpp"
#include "comedia/rng.hpp"
#include "comedia/synthetic.hpp"
#include "comedia/tei_parser.hpp"
#include "comedia/tokenizer.hpp"

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

using namespace comedia;
namespace fs = std::filesystem;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
    Status status = Status::Fail;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::optional<fs::path> live_corpus() {
    const char* dir = std::getenv("COMEDIA_CALDRACOR_DIR");
    if (!dir || !*dir || !fs::is_directory(dir)) return std::nullopt;
    return fs::path(dir);
}

const char* kNoLive = "real-corpus part SKIP: COMEDIA_CALDRACOR_DIR not set and the DraCor API is unreachable";

/// Combines an offline verdict with an optional real-corpus verdict.
Outcome with_live(bool offline_ok, std::string offline_detail, const std::optional<std::pair<bool, std::string>>& live) {
    Outcome o;
    o.detail = std::move(offline_detail);
    if (live) {
        o.status = offline_ok && live->first ? Status::Pass : Status::Fail;
        o.detail += "; real corpus: " + live->second;
    } else {
        o.status = offline_ok ? Status::Pass : Status::Fail;
        o.detail += std::string("; ") + kNoLive;
    }
    return o;
}

std::string run_cli(const fs::path& dir, const std::string& args) {
    const std::string cmd = "cd '" + dir.string() + "' && '" COMEDIA_CLI "' " + args + " 2>&1";
    std::string output;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) throw Error(ErrorKind::InvalidArgument, "cannot start " + cmd);
    char buf[512];
    while (std::fgets(buf, sizeof buf, pipe)) output += buf;
    if (pclose(pipe) != 0) throw Error(ErrorKind::InvalidArgument, "command failed: " + cmd + "\n" + output);
    return output;
}

std::vector<Prediction> from_male_probs(const std::vector<double>& p) {
    std::vector<Prediction> out;
    for (const double x : p) out.push_back(prediction_from_probs(x, 1.0 - x));
    return out;
}

std::vector<LabeledPrediction> confusion(std::size_t mm, std::size_t mf, std::size_t fm, std::size_t ff) {
    std::vector<LabeledPrediction> out;
    out.insert(out.end(), mm, {Gender::Male, Gender::Male});
    out.insert(out.end(), mf, {Gender::Male, Gender::Female});
    out.insert(out.end(), fm, {Gender::Female, Gender::Male});
    out.insert(out.end(), ff, {Gender::Female, Gender::Female});
    return out;
}

std::vector<Play> load_plays(const fs::path& dir) { return load_corpus(dir, SegmentationRules::defaults()); }

// ---------------------------------------------------------------------------

Outcome gradient_check() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    const std::size_t n = 120;
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, gradcheck::max_rel_error(gradcheck::random_instance(1000 + i)));
    const double t = seconds_since(t0);
    const bool ok = worst < 1e-4 && t < 30.0;
    return {ok ? Status::Pass : Status::Fail, std::to_string(n) + " instances, max rel error " + fmt("%.2e", worst) +
                                                  " (< 1e-4), " + fmt("%.2f", t) + " s (< 30 s)"};
}

Outcome ig_completeness(const fs::path& work) {
    const auto t0 = std::chrono::steady_clock::now();
    // linear surrogate: the Riemann sum is exact at any step count
    Rng rng(5);
    double linear_worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t rows = 1 + rng.uniform_index(12);
        const std::size_t cols = 1 + rng.uniform_index(8);
        Matrix w(rows, cols), x(rows, cols), b(rows, cols);
        for (auto& v : w.data) v = rng.uniform(-2.0, 2.0);
        for (auto& v : x.data) v = rng.uniform(-2.0, 2.0);
        if (trial % 2)
            for (auto& v : b.data) v = rng.uniform(-1.0, 1.0);
        const LinearScore f(w);
        for (const std::size_t m : {1, 2, 7, 64, 256}) {
            const auto ig = integrated_gradients(f, x, b, m);
            linear_worst = std::max(linear_worst, completeness_gap(f, x, b, ig));
        }
    }

    // trained character model, first 20 validation documents
    const auto vocab = Vocab::load(work / "vocab");
    const auto ckpt = load_checkpoint(work / "models" / "character" / "model.ckpt", vocab.digest());
    auto docs = read_documents(dataset_file(work / "prepared", Granularity::Character, Partition::Validation));
    if (docs.size() > 20) docs.resize(20);
    double model_worst = 0.0;
    for (const auto& d : docs) {
        const auto seq = encode(d.text, vocab, ckpt.hyper.max_len);
        model_worst = std::max(model_worst, completeness_gap(ckpt.params, seq, {256, Baseline::AllPad}));
    }
    const double t = seconds_since(t0);
    const bool ok = linear_worst < 1e-12 && docs.size() == 20 && model_worst <= 1e-3 && t < 60.0;
    return {ok ? Status::Pass : Status::Fail,
            "linear surrogate max gap " + fmt("%.1e", linear_worst) + " (< 1e-12) over m in {1,2,7,64,256}; trained model " +
                std::to_string(docs.size()) + " validation docs, max gap " + fmt("%.2e", model_worst) +
                " (<= 1e-3) at m=256; " + fmt("%.1f", t) + " s"};
}

Outcome aggregation_oracle() {
    Rng rng(11);
    double gm_worst = 0.0;
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t x = 1 + trial % 30;
        std::vector<double> pm;
        for (std::size_t i = 0; i < x; ++i) pm.push_back(rng.uniform(0.01, 0.99));
        std::vector<double> pf;
        for (const double p : pm) pf.push_back(1.0 - p);
        const auto d = geometric_mean(from_male_probs(pm));
        const double om = oracle::gm_direct(pm);
        const double of = oracle::gm_direct(pf);
        gm_worst = std::max({gm_worst, std::abs((*d.gm_scores)[0] - om), std::abs((*d.gm_scores)[1] - of)});
        if (d.label != (om >= of ? Gender::Male : Gender::Female)) gm_worst = 1.0;
    }
    const auto example = geometric_mean(from_male_probs({0.9, 0.6, 0.8}));
    const bool example_ok = std::abs((*example.gm_scores)[0] - 0.7560) < 5e-5 &&
                            std::abs((*example.gm_scores)[1] - 0.2000) < 5e-5 && example.label == Gender::Male;

    // counting oracle; probabilities near one half make ties common
    std::size_t mismatches = 0;
    std::size_t ties = 0;
    const std::vector<double> palette = {0.05, 0.3, 0.45, 0.55, 0.7, 0.95};
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(8);
        std::vector<double> pm;
        for (std::size_t i = 0; i < n; ++i)
            pm.push_back(rng.bernoulli(0.5) ? palette[rng.uniform_index(palette.size())] : rng.uniform(0.01, 0.99));
        std::size_t male = 0;
        for (const double p : pm) male += p > 0.5 ? 1 : 0;
        const std::size_t female = n - male;
        Gender expected = male > female ? Gender::Male : Gender::Female;
        double confidence = static_cast<double>(std::max(male, female)) / static_cast<double>(n);
        if (male == female) {
            ++ties;
            std::vector<double> pf;
            for (const double p : pm) pf.push_back(1.0 - p);
            expected = oracle::gm_direct(pm) >= oracle::gm_direct(pf) ? Gender::Male : Gender::Female;
            confidence = 0.5;
        }
        const auto d = majority_vote(from_male_probs(pm));
        if (d.label != expected || d.confidence != confidence || (*d.vote_counts)[0] != male ||
            (*d.vote_counts)[1] != female)
            ++mismatches;
    }
    const bool ok = gm_worst <= 1e-12 && example_ok && mismatches == 0 && ties > 0;
    return {ok ? Status::Pass : Status::Fail,
            "gm vs direct product max diff " + fmt("%.1e", gm_worst) + " (x <= 30); {0.9,0.6,0.8} -> " +
                fmt("%.4f", (*example.gm_scores)[0]) + "; majority: " + std::to_string(mismatches) +
                " mismatches in 1000 sets (" + std::to_string(ties) + " ties)"};
}

Outcome metrics_oracle() {
    const auto m = evaluate(confusion(10, 1, 2, 5));
    const bool example_ok = std::abs(m.macro.f1 - 0.8194) <= 5e-5 && std::abs(m.male.f1 - 20.0 / 23.0) < 1e-12 &&
                            std::abs(m.female.f1 - 10.0 / 13.0) < 1e-12;
    Rng rng(13);
    std::size_t exact_failures = 0;
    double oracle_worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t mm = rng.uniform_index(40), mf = rng.uniform_index(40), fm = rng.uniform_index(40),
                          ff = rng.uniform_index(40);
        if (mm + mf + fm + ff == 0) continue;
        const auto r = evaluate(confusion(mm, mf, fm, ff));
        if (r.macro.f1 != (r.male.f1 + r.female.f1) / 2.0) ++exact_failures;
        const double om = oracle::f1_of({double(mm), double(fm), double(mf)});
        const double of = oracle::f1_of({double(ff), double(mf), double(fm)});
        oracle_worst = std::max({oracle_worst, std::abs(r.male.f1 - om), std::abs(r.female.f1 - of)});
    }
    const bool ok = example_ok && exact_failures == 0 && oracle_worst < 1e-12;
    return {ok ? Status::Pass : Status::Fail,
            "worked example macro-F1 " + fmt("%.4f", m.macro.f1) + " (0.8194 +- 5e-5); 1000 random matrices: " +
                std::to_string(exact_failures) + " macro != mean(per-class F1), per-class vs oracle max diff " +
                fmt("%.1e", oracle_worst)};
}

double closed_form_baseline(double q) { return q > 0 ? (2 * q / (1 + q)) / 2 : 0.0; }

Outcome baseline_formula(const std::optional<std::vector<Play>>& live) {
    Rng rng(17);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(3000);
        const std::size_t male = rng.uniform_index(n + 1);
        std::vector<Gender> golds(n, Gender::Female);
        std::fill_n(golds.begin(), male, Gender::Male);
        const double q = static_cast<double>(male) / static_cast<double>(n);
        worst = std::max(worst, std::abs(most_frequent_baseline(golds).macro.f1 - closed_form_baseline(q)));
    }
    std::optional<std::pair<bool, std::string>> live_result;
    if (live) {
        std::vector<Gender> golds;
        for (const auto& c : filter_characters(*live)) golds.push_back(c.character.gender);
        const double f1 = most_frequent_baseline(golds).macro.f1;
        live_result = {{f1 >= 0.38 && f1 <= 0.42, "baseline macro-F1 " + fmt("%.4f", f1) + " (band [0.38, 0.42])"}};
    }
    return with_live(worst <= 1e-12, "closed form (2q/(1+q))/2 max diff " + fmt("%.1e", worst) + " over 1000 q",
                     live_result);
}

std::pair<std::size_t, std::size_t> masking_violations(const std::vector<Play>& corpus) {
    const auto prepared = prepare_corpus(corpus, {});
    return {oracle::single_play_types(prepared.masked).size(), oracle::surviving_names(corpus, prepared.masked).size()};
}

Outcome masking_invariants(const fs::path& synthetic_tei, const std::optional<std::vector<Play>>& live) {
    const auto fixture = load_plays(testutil::data_dir() / "corpus");
    const auto [f_single, f_names] = masking_violations(fixture);
    const auto synthetic = load_plays(synthetic_tei);
    const auto [s_single, s_names] = masking_violations(synthetic);
    const bool ok = f_single + f_names + s_single + s_names == 0;
    std::optional<std::pair<bool, std::string>> live_result;
    if (live) {
        const auto prepared = prepare_corpus(*live, {});
        const auto single = oracle::single_play_types(prepared.masked).size();
        const auto names = oracle::surviving_names(*live, prepared.masked).size();
        const double masked = static_cast<double>(prepared.mask_report.masked_names.size());
        const bool in_band = std::abs(masked - 751.0) <= 0.05 * 751.0;
        live_result = {{single == 0 && names == 0 && in_band,
                        std::to_string(single) + " single-play types, " + std::to_string(names) +
                            " surviving names, " + fmt("%.0f", masked) + " masked names (751 +- 5%)"}};
    }
    return with_live(ok,
                     "recount after prepare: fixture " + std::to_string(f_single) + " single-play types, " +
                         std::to_string(f_names) + " surviving names; synthetic " + std::to_string(s_single) + ", " +
                         std::to_string(s_names),
                     live_result);
}

Outcome corpus_statistics(const std::optional<std::vector<Play>>& live) {
    const auto fixture = load_plays(testutil::data_dir() / "corpus");
    const auto prepared = prepare_corpus(fixture, {});
    const auto& s = prepared.stats;
    const auto sizes = prepared.split.sizes();
    std::size_t chars = 0, scenes = 0, utts = 0;
    for (const auto p : {Partition::Train, Partition::Test, Partition::Validation}) {
        chars += prepared.documents(Granularity::Character, p).size();
        scenes += prepared.documents(Granularity::Scene, p).size();
        utts += prepared.documents(Granularity::Utterance, p).size();
    }
    const bool ok = s.characters == 7 && s.male.count == 4 && s.female.count == 3 && s.male.mean_words == 33.75 &&
                    s.male.min_words == 30 && s.male.max_words == 40 && s.female.mean_words == 37.0 &&
                    s.female.min_words == 31 && s.female.max_words == 45 && chars == 7 && scenes == 15 &&
                    utts == 19 && prepared.mask_report.masked_names.size() == 10 && sizes[0] == 5 && sizes[1] == 0 &&
                    sizes[2] == 2;
    std::ostringstream d;
    d << "fixture: " << s.characters << " characters (" << s.male.count << " M, " << s.female.count << " F), docs "
      << chars << "/" << scenes << "/" << utts << " char/scene/utt, " << prepared.mask_report.masked_names.size()
      << " masked names, split " << sizes[0] << "/" << sizes[1] << "/" << sizes[2];
    std::optional<std::pair<bool, std::string>> live_result;
    if (live) {
        const auto st = corpus_stats(filter_characters(*live));
        const double ratio = st.female.count ? static_cast<double>(st.male.count) / st.female.count : 0.0;
        const bool in_band = std::abs(static_cast<double>(st.characters) - 1515.0) <= 0.05 * 1515.0;
        live_result = {{in_band && ratio >= 1.8 && ratio <= 2.3,
                        std::to_string(st.characters) + " characters (1515 +- 5%), M:F " + fmt("%.2f", ratio) +
                            " ([1.8, 2.3])"}};
    }
    return with_live(ok, d.str(), live_result);
}

struct SyntheticRuns {
    fs::path work_a;
    fs::path work_b;
    double cold_seconds = 0.0;
    std::string warm_output;
};

constexpr std::uint64_t kSyntheticSeed = 1;

std::string synthetic_config() {
    return "[corpus]\nsource = directory\ntei_dir = tei\n"
           "[paths]\nwork = run\n"
           "[run]\nseed = " +
           std::to_string(kSyntheticSeed) +
           "\n"
           "[tokenizer]\nvocab_size = 2000\n"
           "[model]\nlr = 0.01\nmax_epochs = 30\npatience = 6\n"
           "[ig]\ngranularity = character\nsteps = 256\nhtml_documents = 2\n"
           "[crossdress]\ndb = tei/crossdress.csv\n";
}

/// Two cold runs from byte-identical configs in separate directories plus a
/// warm rerun of the first, all through the command-line tool.
SyntheticRuns run_synthetic(const fs::path& root) {
    SyntheticOptions opts;
    opts.seed = kSyntheticSeed;
    const auto corpus = generate_synthetic(opts);
    SyntheticRuns r;
    for (const auto* name : {"a", "b"}) {
        write_synthetic(corpus, root / name / "tei");
        atomic_write(root / name / "run.ini", synthetic_config());
    }
    const auto t0 = std::chrono::steady_clock::now();
    run_cli(root / "a", "run --config run.ini");
    r.cold_seconds = seconds_since(t0);
    run_cli(root / "b", "run --config run.ini");
    r.warm_output = run_cli(root / "a", "run --config run.ini");
    r.work_a = root / "a" / "run";
    r.work_b = root / "b" / "run";
    return r;
}

nlohmann::json load_json(const fs::path& p) { return nlohmann::json::parse(read_file(p)); }

double doc_f1(const nlohmann::json& metrics, const char* g) {
    return metrics.at(g).at("document_level").at("macro").at("f1").get<double>();
}

Outcome synthetic_end_to_end(const SyntheticRuns& runs) {
    const auto m = load_json(runs.work_a / "evaluate" / "metrics.json");
    const double c = doc_f1(m, "character"), s = doc_f1(m, "scene"), u = doc_f1(m, "utterance");
    const double maj = m["utterance"]["majority"]["macro"]["f1"].get<double>();
    const double gm = m["utterance"]["gmean"]["macro"]["f1"].get<double>();
    const bool a = c >= 0.95;
    const bool b = c >= s && s >= u;
    const bool cc = gm - maj >= 0.05;
    const bool t = runs.cold_seconds < 300.0;
    return {a && b && cc && t ? Status::Pass : Status::Fail,
            "200 synthetic characters, " + m["character"]["documents"].dump() + " test characters: (a) char macro-F1 " +
                fmt("%.3f", c) + " (>= 0.95) " + (a ? "ok" : "FAILED") + "; (b) char " + fmt("%.3f", c) + " >= scene " +
                fmt("%.3f", s) + " >= utt " + fmt("%.3f", u) + " " + (b ? "ok" : "FAILED") +
                "; (c) utterance gmean " + fmt("%.3f", gm) + " - majority " + fmt("%.3f", maj) + " = " +
                fmt("%.3f", gm - maj) + " (>= 0.05) " + (cc ? "ok" : "FAILED") + "; cold run " +
                fmt("%.1f", runs.cold_seconds) + " s (< 300 s)"};
}

Outcome quartile_trend(const SyntheticRuns& runs) {
    const auto m = load_json(runs.work_a / "evaluate" / "metrics.json");
    const auto& q = m["utterance"]["quartiles"];
    const double q1 = q[0]["macro_f1"].get<double>();
    const double q4 = q[3]["macro_f1"].get<double>();
    return {q4 > q1 ? Status::Pass : Status::Fail,
            "utterance Q1 [" + q[0]["min_words"].dump() + "-" + q[0]["max_words"].dump() + " words] macro-F1 " +
                fmt("%.3f", q1) + " < Q4 [" + q[3]["min_words"].dump() + "-" + q[3]["max_words"].dump() + "] " +
                fmt("%.3f", q4)};
}

Outcome determinism(const SyntheticRuns& runs) {
    const auto metrics_a = read_file(runs.work_a / "evaluate" / "metrics.json");
    const auto metrics_b = read_file(runs.work_b / "evaluate" / "metrics.json");
    std::size_t ckpt_equal = 0;
    for (const auto* g : {"character", "scene", "utterance"}) {
        const auto rel = fs::path("models") / g / "model.ckpt";
        if (sha256_hex(read_file(runs.work_a / rel)) == sha256_hex(read_file(runs.work_b / rel))) ++ckpt_equal;
    }
    const auto manifest = load_json(runs.work_a / "manifest.json");
    std::size_t cached = 0;
    for (const auto& s : manifest["stages"]) cached += s["cached"].get<bool>() ? 1 : 0;
    const auto metrics_warm = read_file(runs.work_a / "evaluate" / "metrics.json");
    const bool ok = metrics_a == metrics_b && metrics_a == metrics_warm && ckpt_equal == 3 &&
                    cached == manifest["stages"].size();
    return {ok ? Status::Pass : Status::Fail,
            std::string("metrics.json ") + (metrics_a == metrics_b ? "identical" : "DIFFERENT") +
                " across two cold runs, " + std::to_string(ckpt_equal) + "/3 checkpoint digests identical; warm rerun: " +
                std::to_string(cached) + "/" + std::to_string(manifest["stages"].size()) + " stages cached, metrics " +
                (metrics_a == metrics_warm ? "identical" : "DIFFERENT")};
}

std::optional<std::pair<bool, std::string>> live_crossdress(const fs::path& dir) {
    testutil::TempDir tmp("live");
    auto config = PipelineConfig::parse("[corpus]\ntei_dir = " + dir.string() + "\n[paths]\nwork = " +
                                            (tmp / "run").string() +
                                            "\n[run]\ngranularities = scene\n[tokenizer]\nvocab_size = 8000\n"
                                            "[model]\nlr = 0.01\n[ig]\nenabled = false\n[crossdress]\ndb = " COMEDIA_CROSSDRESS_DB
                                            "\n",
                                        tmp.path());
    try {
        run_pipeline(config);
    } catch (const Error& e) {
        return {{false, std::string("report not generated: ") + e.what()}};
    }
    const auto r = load_json(tmp / "run" / "crossdress" / "report.json");
    std::ostringstream d;
    d << "report generated for " << r["characters"].size() << " characters (informational: mean confidence "
      << fmt("%.2f", r["mean_confidence_crossdressers"].get<double>()) << " vs cohort "
      << fmt("%.2f", r["mean_confidence_other_female"].get<double>()) << ")";
    return {{r["characters"].size() == 5, d.str()}};
}

Outcome crossdress(const SyntheticRuns& runs, const std::optional<fs::path>& live_dir) {
    const auto r = load_json(runs.work_a / "crossdress" / "report.json");
    const auto& c = r["characters"].at(0);
    const double agreement = c["agreement"].get<double>();
    const double elsewhere = c["male_rate_unflagged"].get<double>();
    const bool ok = agreement >= 0.8 && elsewhere <= 0.2;
    std::optional<std::pair<bool, std::string>> live_result;
    if (live_dir) live_result = live_crossdress(*live_dir);
    return with_live(ok,
                     "synthetic cross-dresser " + c["character"].get<std::string>() + ": " +
                         c["flagged_scenes"].dump() + " flagged scenes, male share " + fmt("%.2f", agreement) +
                         " (>= 0.8), unflagged male share " + fmt("%.2f", elsewhere) + " (<= 0.2)",
                     live_result);
}

}  // namespace

int main() {
    set_warning_sink([](std::string_view) {});
    const auto live_dir = live_corpus();
    std::optional<std::vector<Play>> live;
    if (live_dir) live = load_plays(*live_dir);

    testutil::TempDir root("acceptance");
    std::optional<SyntheticRuns> runs;
    std::string runs_error;
    try {
        runs = run_synthetic(root.path());
    } catch (const std::exception& e) {
        runs_error = e.what();
    }
    auto needs_runs = [&](const std::function<Outcome(const SyntheticRuns&)>& f) -> Outcome {
        if (!runs) return {Status::Fail, "synthetic pipeline run failed: " + runs_error};
        return f(*runs);
    };

    std::vector<std::function<Outcome()>> criteria = {
        [] { return gradient_check(); },
        [&] { return needs_runs([](const SyntheticRuns& r) { return ig_completeness(r.work_a); }); },
        [] { return aggregation_oracle(); },
        [] { return metrics_oracle(); },
        [&] { return baseline_formula(live); },
        [&] { return masking_invariants(root / "a" / "tei", live); },
        [&] { return corpus_statistics(live); },
        [&] { return needs_runs(synthetic_end_to_end); },
        [&] { return needs_runs(quartile_trend); },
        [&] { return needs_runs(determinism); },
        [&] { return needs_runs([&](const SyntheticRuns& r) { return crossdress(r, live_dir); }); },
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i]();
        } catch (const std::exception& e) {
            o = {Status::Fail, std::string("threw: ") + e.what()};
        }
        const char* label = o.status == Status::Pass ? "PASS" : o.status == Status::Skip ? "SKIP" : "FAIL";
        if (o.status == Status::Fail) ++failures;
        std::cout << "CRITERION " << (i + 1) << " " << label << "  " << o.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
