#include "comedia/pipeline.hpp"

#include "comedia/error.hpp"
#include "comedia/fsutil.hpp"
#include "comedia/log.hpp"
#include "comedia/report.hpp"
#include "comedia/tei_parser.hpp"
#include "comedia/text.hpp"
#include "comedia/tokenizer.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

namespace comedia {
namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>> kSchema = {
    {"corpus", {"source", "id", "api_base", "tei_dir", "segmentation"}},
    {"paths", {"cache", "work"}},
    {"run", {"seed", "granularities", "threads"}},
    {"dataset", {"min_words", "train", "test", "validation"}},
    {"tokenizer", {"vocab_size", "max_len"}},
    {"model", {"embed_dim", "hidden_dim", "lr", "beta1", "beta2", "eps", "batch_size", "max_epochs", "patience"}},
    {"evaluate", {"partition", "ranking_k"}},
    {"ig", {"enabled", "steps", "baseline", "granularity", "partition", "top_k", "html_documents"}},
    {"crossdress", {"db", "pin_validation"}},
};

class IniReader {
public:
    explicit IniReader(const pt::ptree& tree) : tree_(tree) {}

    std::optional<std::string> text(const std::string& key) const {
        if (const auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'))) {
            auto s = normalize_whitespace(*v);
            if (!s.empty()) return s;
        }
        return std::nullopt;
    }

    template <typename T>
    std::optional<T> number(const std::string& key) const {
        const auto s = text(key);
        if (!s) return std::nullopt;
        std::istringstream in(*s);
        T value{};
        in >> value;
        if (in.fail() || !in.eof())
            throw Error(ErrorKind::ConfigInvalid, key + ": '" + *s + "' is not a valid number");
        if constexpr (std::is_unsigned_v<T>) {
            if (s->front() == '-') throw Error(ErrorKind::ConfigInvalid, key + ": must not be negative");
        }
        return value;
    }

    std::optional<bool> boolean(const std::string& key) const {
        const auto s = text(key);
        if (!s) return std::nullopt;
        const auto v = to_lower(*s);
        if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
        if (v == "false" || v == "no" || v == "0" || v == "off") return false;
        throw Error(ErrorKind::ConfigInvalid, key + ": '" + *s + "' is not a boolean");
    }

private:
    const pt::ptree& tree_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

Partition partition_field(const IniReader& ini, const std::string& key, Partition fallback) {
    const auto s = ini.text(key);
    if (!s) return fallback;
    const auto p = parse_partition(*s);
    if (!p) throw Error(ErrorKind::ConfigInvalid, key + ": unknown partition '" + *s + "'");
    return *p;
}

Granularity granularity_field(const std::string& key, const std::string& s) {
    const auto g = parse_granularity(s);
    if (!g) throw Error(ErrorKind::ConfigInvalid, key + ": unknown granularity '" + s + "'");
    return *g;
}

std::string file_digest(const fs::path& p) { return sha256_hex(read_file(p)); }

std::string doc_file_name(const std::string& doc_id) {
    std::string out;
    for (const char c : doc_id) out.push_back(c == '/' ? '_' : c);
    return out;
}

std::string digest_of_files(const fs::path& dir, const std::vector<std::string>& extensions) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const auto ext = e.path().extension().string();
        if (std::find(extensions.begin(), extensions.end(), ext) != extensions.end()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::string acc;
    for (const auto& f : files) acc += f.filename().string() + " " + file_digest(f) + "\n";
    return sha256_hex(acc);
}

std::string stage_key(const std::string& name, const nlohmann::json& settings, const std::vector<std::string>& upstream) {
    std::string acc = name + "\n" + settings.dump() + "\n";
    for (const auto& u : upstream) acc += u + "\n";
    return sha256_hex(acc);
}

class StageRunner {
public:
    StageRunner(fs::path work, RunManifest& manifest) : work_(std::move(work)), manifest_(manifest) {}

    /// Runs `body` into <work>/<dir> unless a stamp with the same key and
    /// intact outputs is already there.
    void run(const std::string& name, const std::string& dir, const std::string& key,
             const std::function<void(const fs::path&)>& body) {
        const fs::path out = work_ / dir;
        const fs::path stamp = out / "stamp.json";
        StageRecord rec{name, key, false, {}};
        if (fs::exists(stamp)) {
            try {
                const auto j = nlohmann::json::parse(read_file(stamp));
                bool intact = j.at("key").get<std::string>() == key;
                std::map<std::string, std::string> outputs;
                for (const auto& [path, digest] : j.at("outputs").items()) {
                    outputs[path] = digest.get<std::string>();
                    const auto abs = work_ / path;
                    if (intact && (!fs::exists(abs) || file_digest(abs) != outputs[path])) intact = false;
                }
                if (intact) {
                    rec.cached = true;
                    rec.outputs = std::move(outputs);
                    manifest_.stages.push_back(std::move(rec));
                    return;
                }
            } catch (const nlohmann::json::exception&) {
                // unreadable stamp: rebuild the stage
            }
        }
        fs::remove_all(out);
        fs::create_directories(out);
        try {
            body(out);
        } catch (const Error& e) {
            throw Error(e.kind(), "stage " + name + ": " + e.message());
        }
        for (const auto& e : fs::recursive_directory_iterator(out)) {
            if (!e.is_regular_file() || e.path() == stamp) continue;
            rec.outputs[fs::relative(e.path(), work_).generic_string()] = file_digest(e.path());
        }
        atomic_write(stamp, nlohmann::json({{"key", key}, {"outputs", rec.outputs}}).dump(2) + "\n");
        manifest_.stages.push_back(std::move(rec));
    }

private:
    fs::path work_;
    RunManifest& manifest_;
};

nlohmann::json decision_json(const RankedDecision& d) {
    return {{"character", d.decision.char_key.str()},
            {"gold", std::string(to_string(d.gold))},
            {"label", std::string(to_string(d.decision.label))},
            {"confidence", d.decision.confidence},
            {"inputs", d.decision.inputs}};
}

std::vector<Document> read_partition(const fs::path& prepared, Granularity g, Partition p) {
    return read_documents(dataset_file(prepared, g, p));
}

}  // namespace

PipelineConfig PipelineConfig::load(const fs::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error& e) {
        throw Error(ErrorKind::ConfigInvalid, e.message());
    }
    return parse(text, fs::absolute(path).parent_path());
}

PipelineConfig PipelineConfig::parse(const std::string& ini_text, const fs::path& base_dir) {
    pt::ptree tree;
    try {
        std::istringstream in(ini_text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw Error(ErrorKind::ConfigInvalid, std::string("line ") + std::to_string(e.line()) + ": " + e.message());
    }
    for (const auto& [section, body] : tree) {
        const auto it = kSchema.find(section);
        if (it == kSchema.end()) throw Error(ErrorKind::ConfigInvalid, "unknown section [" + section + "]");
        if (body.empty() && !body.data().empty())
            throw Error(ErrorKind::ConfigInvalid, "key '" + section + "' must sit inside a section");
        for (const auto& [key, value] : body) {
            if (!it->second.contains(key))
                throw Error(ErrorKind::ConfigInvalid, "unknown key " + section + "." + key);
        }
    }
    const IniReader ini(tree);
    PipelineConfig c;

    const auto source = ini.text("corpus.source").value_or("directory");
    if (source == "directory") {
        c.source = SourceKind::Directory;
        const auto dir = ini.text("corpus.tei_dir");
        if (!dir) throw Error(ErrorKind::ConfigInvalid, "corpus.tei_dir is required for a directory source");
        c.tei_dir = resolve(base_dir, *dir);
    } else if (source == "api") {
        c.source = SourceKind::Api;
    } else {
        throw Error(ErrorKind::ConfigInvalid, "corpus.source: expected 'directory' or 'api', got '" + source + "'");
    }
    c.corpus_id = ini.text("corpus.id").value_or(kDefaultCorpus);
    c.api_base = ini.text("corpus.api_base").value_or(kDefaultApiBase);
    if (const auto s = ini.text("corpus.segmentation")) c.segmentation_rules = resolve(base_dir, *s);

    const auto work = ini.text("paths.work");
    if (!work) throw Error(ErrorKind::ConfigInvalid, "paths.work is required");
    c.work_dir = resolve(base_dir, *work);
    c.cache_dir = ini.text("paths.cache") ? resolve(base_dir, *ini.text("paths.cache")) : c.work_dir / "cache";

    c.seed = ini.number<std::uint64_t>("run.seed").value_or(0);
    if (const auto gs = ini.text("run.granularities")) {
        c.granularities.clear();
        std::string item;
        std::istringstream in(*gs);
        while (std::getline(in, item, ',')) {
            item = normalize_whitespace(item);
            if (item.empty()) continue;
            const auto g = granularity_field("run.granularities", item);
            if (std::find(c.granularities.begin(), c.granularities.end(), g) == c.granularities.end())
                c.granularities.push_back(g);
        }
        if (c.granularities.empty()) throw Error(ErrorKind::ConfigInvalid, "run.granularities is empty");
    }
    c.threads = ini.number<std::size_t>("run.threads").value_or(0);

    c.min_words = ini.number<std::size_t>("dataset.min_words").value_or(30);
    c.ratios.train = ini.number<double>("dataset.train").value_or(c.ratios.train);
    c.ratios.test = ini.number<double>("dataset.test").value_or(c.ratios.test);
    c.ratios.validation = ini.number<double>("dataset.validation").value_or(c.ratios.validation);

    const auto vocab = ini.number<std::size_t>("tokenizer.vocab_size");
    if (!vocab) throw Error(ErrorKind::ConfigInvalid, "tokenizer.vocab_size is required");
    c.vocab_size = *vocab;
    c.max_len = ini.number<std::size_t>("tokenizer.max_len").value_or(kDefaultMaxLen);
    if (c.max_len == 0) throw Error(ErrorKind::ConfigInvalid, "tokenizer.max_len must be > 0");

    auto& h = c.hyper;
    h.embed_dim = ini.number<std::size_t>("model.embed_dim").value_or(h.embed_dim);
    h.hidden_dim = ini.number<std::size_t>("model.hidden_dim").value_or(h.hidden_dim);
    h.lr = ini.number<double>("model.lr").value_or(h.lr);
    h.beta1 = ini.number<double>("model.beta1").value_or(h.beta1);
    h.beta2 = ini.number<double>("model.beta2").value_or(h.beta2);
    h.eps = ini.number<double>("model.eps").value_or(h.eps);
    h.batch_size = ini.number<std::size_t>("model.batch_size").value_or(h.batch_size);
    h.max_epochs = ini.number<std::size_t>("model.max_epochs").value_or(h.max_epochs);
    h.patience = ini.number<std::size_t>("model.patience").value_or(h.patience);
    h.seed = c.seed;
    h.max_len = c.max_len;
    h.vocab_size = std::max<std::size_t>(c.vocab_size, 1);
    try {
        h.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::ConfigInvalid, e.message());
    }

    c.eval_partition = partition_field(ini, "evaluate.partition", Partition::Test);
    c.ranking_k = ini.number<std::size_t>("evaluate.ranking_k").value_or(10);

    c.attribute = ini.boolean("ig.enabled").value_or(true);
    c.ig.steps = ini.number<std::size_t>("ig.steps").value_or(c.ig.steps);
    if (c.ig.steps == 0) throw Error(ErrorKind::ConfigInvalid, "ig.steps must be >= 1");
    if (const auto b = ini.text("ig.baseline")) {
        const auto parsed = parse_baseline(*b);
        if (!parsed) throw Error(ErrorKind::ConfigInvalid, "ig.baseline: expected 'all-pad' or 'zero'");
        c.ig.baseline = *parsed;
    }
    if (const auto g = ini.text("ig.granularity")) c.attribution_granularity = granularity_field("ig.granularity", *g);
    c.attribution_partition = partition_field(ini, "ig.partition", Partition::Validation);
    c.top_k = ini.number<std::size_t>("ig.top_k").value_or(20);
    c.html_documents = ini.number<std::size_t>("ig.html_documents").value_or(5);

    if (const auto db = ini.text("crossdress.db")) c.crossdress_db = resolve(base_dir, *db);
    c.pin_crossdressers = ini.boolean("crossdress.pin_validation").value_or(true);
    return c;
}

nlohmann::json PipelineConfig::to_json() const {
    nlohmann::json gs = nlohmann::json::array();
    for (const auto g : granularities) gs.push_back(std::string(comedia::to_string(g)));
    return {{"source", source == SourceKind::Api ? "api" : "directory"},
            {"corpus_id", corpus_id},
            {"api_base", api_base},
            {"tei_dir", tei_dir.generic_string()},
            {"segmentation", segmentation_rules ? segmentation_rules->generic_string() : ""},
            {"seed", seed},
            {"granularities", gs},
            {"min_words", min_words},
            {"ratios", {ratios.train, ratios.test, ratios.validation}},
            {"vocab_size", vocab_size},
            {"max_len", max_len},
            {"hyper", hyper.to_json()},
            {"ig",
             {{"enabled", attribute},
              {"steps", ig.steps},
              {"baseline", std::string(comedia::to_string(ig.baseline))},
              {"granularity", std::string(comedia::to_string(attribution_granularity))},
              {"partition", std::string(comedia::to_string(attribution_partition))},
              {"top_k", top_k},
              {"html_documents", html_documents}}},
            {"evaluate", {{"partition", std::string(comedia::to_string(eval_partition))}, {"ranking_k", ranking_k}}},
            {"crossdress_db", crossdress_db ? crossdress_db->generic_string() : ""},
            {"pin_crossdressers", pin_crossdressers}};
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json stages_json = nlohmann::json::array();
    for (const auto& s : stages)
        stages_json.push_back({{"name", s.name}, {"key", s.key}, {"cached", s.cached}, {"outputs", s.outputs}});
    return {{"created_at", created_at}, {"config_digest", config_digest}, {"seed", seed}, {"stages", stages_json}};
}

nlohmann::json EvaluationResult::to_json(std::size_t ranking_k) const {
    nlohmann::json j = {{"granularity", std::string(comedia::to_string(granularity))},
                        {"documents", documents.size()},
                        {"document_level", document_metrics.to_json()},
                        {"baseline", baseline.to_json()}};
    if (majority) j["majority"] = majority->to_json();
    if (gmean) j["gmean"] = gmean->to_json();
    if (quartiles) j["quartiles"] = quartiles->to_json();
    if (!decisions.empty()) {
        const auto [correct, incorrect] = confidence_ranking(decisions, ranking_k);
        nlohmann::json c = nlohmann::json::array();
        nlohmann::json w = nlohmann::json::array();
        for (const auto& d : correct) c.push_back(decision_json(d));
        for (const auto& d : incorrect) w.push_back(decision_json(d));
        j["ranking"] = {{"correct", c}, {"incorrect", w}};
    }
    return j;
}

EvaluationResult evaluate_model(const Params& params, const Vocab& vocab, std::size_t max_len,
                                const std::vector<Document>& docs, Granularity granularity) {
    EvaluationResult r;
    r.granularity = granularity;
    for (const auto& d : docs) {
        const auto seq = encode(d.text, vocab, max_len);
        if (seq.attention_len == 0) {
            warn("skipping empty document " + d.doc_id);
            continue;
        }
        r.documents.push_back(d);
        r.predictions.push_back(forward(params, seq));
    }
    if (r.documents.empty()) throw Error(ErrorKind::EmptyInput, "no documents to evaluate");
    r.document_metrics = evaluate_documents(r.documents, r.predictions);
    std::vector<Gender> golds;
    for (const auto& d : r.documents) golds.push_back(d.gold_gender);
    r.baseline = most_frequent_baseline(golds);
    if (granularity == Granularity::Character) {
        r.decisions = attach_gold(aggregate_by_character(r.documents, r.predictions, Aggregation::None), r.documents);
    } else {
        const auto maj = attach_gold(aggregate_by_character(r.documents, r.predictions, Aggregation::Majority), r.documents);
        r.decisions =
            attach_gold(aggregate_by_character(r.documents, r.predictions, Aggregation::GeometricMean), r.documents);
        r.majority = evaluate_decisions(maj);
        r.gmean = evaluate_decisions(r.decisions);
        if (r.documents.size() >= 4) {
            std::vector<LengthLabeled> items;
            for (std::size_t i = 0; i < r.documents.size(); ++i)
                items.push_back({r.documents[i].word_count, r.documents[i].gold_gender, r.predictions[i].label});
            r.quartiles = quartile_f1(std::move(items));
        }
    }
    return r;
}

RunManifest run_pipeline(const PipelineConfig& config, Transport* transport) {
    fs::create_directories(config.work_dir);
    RunManifest manifest;
    manifest.created_at = utc_timestamp();
    manifest.config_digest = sha256_hex(config.to_json().dump());
    manifest.seed = config.seed;
    StageRunner runner(config.work_dir, manifest);
    const fs::path work = config.work_dir;

    // fetch
    fs::path tei_dir;
    std::string source_digest;
    if (config.source == SourceKind::Directory) {
        if (!fs::is_directory(config.tei_dir))
            throw Error(ErrorKind::ConfigInvalid, "corpus.tei_dir " + config.tei_dir.string() + " is not a directory");
        tei_dir = config.tei_dir;
        source_digest = digest_of_files(tei_dir, {".xml"});
        manifest.stages.push_back({"fetch", source_digest, true, {}});
    } else {
        std::unique_ptr<Transport> owned;
        if (!transport) {
            owned = make_http_transport();
            transport = owned.get();
        }
        DracorApiSource source(*transport, config.api_base);
        DracorClient client(source);
        SyncReport report;
        try {
            report = client.sync_corpus(config.corpus_id, config.cache_dir);
        } catch (const Error& e) {
            throw Error(e.kind(), "stage fetch: " + e.message());
        }
        if (report.failed) warn(std::to_string(report.failed) + " plays failed to download; see the cache manifest");
        tei_dir = corpus_cache_dir(config.cache_dir, config.corpus_id);
        std::string acc;
        for (const auto& [play, digest] : report.manifest.content_digests) acc += play + " " + digest + "\n";
        source_digest = sha256_hex(acc);
        StageRecord rec{"fetch", source_digest, report.downloaded == 0, {}};
        for (const auto& [play, digest] : report.manifest.content_digests) rec.outputs["cache:" + play + ".xml"] = digest;
        manifest.stages.push_back(std::move(rec));
    }

    const SegmentationRules rules =
        config.segmentation_rules ? SegmentationRules::load(*config.segmentation_rules) : SegmentationRules::defaults();
    const std::string parse_key =
        stage_key("parse", {{"cues", rules.cues}, {"patterns", rules.patterns}}, {source_digest});
    runner.run("parse", "parsed", parse_key, [&](const fs::path& out) {
        const auto corpus = load_corpus(tei_dir, rules);
        if (corpus.empty()) throw Error(ErrorKind::EmptyCorpus, "no plays in " + tei_dir.string());
        nlohmann::json unresolved = nlohmann::json::object();
        for (const auto& play : corpus) {
            atomic_write(out / "plays" / (play.play_name + ".json"), to_json(play).dump() + "\n");
            if (!play.unresolved_speakers.empty()) unresolved[play.play_name] = play.unresolved_speakers;
        }
        atomic_write(out / "unresolved_speakers.json", unresolved.dump(2) + "\n");
    });

    std::set<CharKey> pinned;
    std::vector<CrossdressRow> crossdress_rows;
    std::string crossdress_digest;
    if (config.crossdress_db) {
        crossdress_rows = load_crossdress_db(*config.crossdress_db);
        crossdress_digest = file_digest(*config.crossdress_db);
        if (config.pin_crossdressers)
            for (const auto& r : crossdress_rows) pinned.insert({r.play_name, r.char_id});
    }
    std::vector<Granularity> prepared_granularities = config.granularities;
    if (std::find(prepared_granularities.begin(), prepared_granularities.end(), Granularity::Character) ==
        prepared_granularities.end())
        prepared_granularities.push_back(Granularity::Character);
    nlohmann::json pinned_json = nlohmann::json::array();
    for (const auto& k : pinned) pinned_json.push_back(k.str());
    nlohmann::json prep_gs = nlohmann::json::array();
    for (const auto g : prepared_granularities) prep_gs.push_back(std::string(to_string(g)));
    const std::string prepare_key = stage_key("prepare",
                                              {{"min_words", config.min_words},
                                               {"seed", config.seed},
                                               {"ratios", {config.ratios.train, config.ratios.test, config.ratios.validation}},
                                               {"pinned", pinned_json},
                                               {"granularities", prep_gs}},
                                              {parse_key});
    const fs::path prepared_dir = work / "prepared";
    runner.run("prepare", "prepared", prepare_key, [&](const fs::path& out) {
        const auto corpus = load_corpus(work / "parsed" / "plays", rules);
        PrepareOptions opts;
        opts.min_words = config.min_words;
        opts.seed = config.seed;
        opts.ratios = config.ratios;
        opts.pinned_validation = pinned;
        const auto prepared = prepare_corpus(corpus, opts);
        write_prepared(prepared, prepared_granularities, out);
    });

    const std::string tokenize_key = stage_key("tokenize", {{"vocab_size", config.vocab_size}}, {prepare_key});
    runner.run("tokenize", "vocab", tokenize_key, [&](const fs::path& out) {
        std::vector<std::string> texts;
        for (const auto& d : read_partition(prepared_dir, Granularity::Character, Partition::Train))
            texts.push_back(d.text);
        train_bpe(texts, config.vocab_size).save(out);
    });
    const Vocab vocab = Vocab::load(work / "vocab");

    std::map<Granularity, std::string> train_keys;
    for (const auto g : config.granularities) {
        const std::string name = "train-" + std::string(to_string(g));
        nlohmann::json settings = config.hyper.to_json();
        settings["granularity"] = std::string(to_string(g));
        train_keys[g] = stage_key(name, settings, {tokenize_key});
        runner.run(name, "models/" + std::string(to_string(g)), train_keys[g], [&](const fs::path& out) {
            TrainLog log;
            const auto ckpt = train(read_partition(prepared_dir, g, Partition::Train),
                                    read_partition(prepared_dir, g, Partition::Validation), vocab, config.hyper, &log);
            save_checkpoint(ckpt, out / "model.ckpt");
            nlohmann::json epochs = nlohmann::json::array();
            for (const auto& e : log.epochs)
                epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_macro_f1", e.val_macro_f1}});
            atomic_write(out / "train_log.json",
                         nlohmann::json({{"initial_loss", log.initial_loss},
                                         {"epochs", epochs},
                                         {"best_epoch", ckpt.best_epoch},
                                         {"val_macro_f1", ckpt.val_macro_f1},
                                         {"params_digest", ckpt.params.digest()}})
                                 .dump(2) +
                             "\n");
        });
    }
    auto model_path = [&](Granularity g) { return work / "models" / std::string(to_string(g)) / "model.ckpt"; };

    std::vector<std::string> eval_upstream;
    for (const auto& [g, k] : train_keys) eval_upstream.push_back(k);
    const std::string eval_key = stage_key(
        "evaluate", {{"partition", std::string(to_string(config.eval_partition))}, {"ranking_k", config.ranking_k}},
        eval_upstream);
    runner.run("evaluate", "evaluate", eval_key, [&](const fs::path& out) {
        nlohmann::json metrics = nlohmann::json::object();
        std::vector<std::pair<std::string, Metrics>> rows;
        std::vector<std::pair<std::string, Metrics>> baseline_rows;
        for (const auto g : config.granularities) {
            const auto ckpt = load_checkpoint(model_path(g), vocab.digest());
            const auto docs = read_partition(prepared_dir, g, config.eval_partition);
            const auto r = evaluate_model(ckpt.params, vocab, ckpt.hyper.max_len, docs, g);
            const std::string gname(to_string(g));
            metrics[gname] = r.to_json(config.ranking_k);
            rows.emplace_back(gname + "/document", r.document_metrics);
            if (r.majority) rows.emplace_back(gname + "/majority", *r.majority);
            if (r.gmean) rows.emplace_back(gname + "/gmean", *r.gmean);
            baseline_rows.emplace_back(gname + "/most-frequent", r.baseline);
            std::string preds;
            for (std::size_t i = 0; i < r.documents.size(); ++i) {
                preds += nlohmann::json({{"doc_id", r.documents[i].doc_id},
                                         {"gold", std::string(to_string(r.documents[i].gold_gender))},
                                         {"label", std::string(to_string(r.predictions[i].label))},
                                         {"p_male", r.predictions[i].probs[0]},
                                         {"word_count", r.documents[i].word_count}})
                             .dump() +
                         "\n";
            }
            atomic_write(out / ("predictions-" + gname + ".jsonl"), preds);
        }
        metrics["partition"] = std::string(to_string(config.eval_partition));
        atomic_write(out / "metrics.json", metrics.dump(2) + "\n");
        std::string text = format_metrics_rows(rows) + "\n" + format_metrics_rows(baseline_rows);
        for (const auto g : config.granularities) {
            const auto& m = metrics[std::string(to_string(g))];
            if (!m.contains("quartiles")) continue;
            text += "\nquartiles (" + std::string(to_string(g)) + ", macro-F1):";
            for (const auto& q : m["quartiles"])
                text += " " + q["quartile"].get<std::string>() + "[" + std::to_string(q["min_words"].get<std::size_t>()) +
                        "-" + std::to_string(q["max_words"].get<std::size_t>()) + "]=" +
                        std::to_string(q["macro_f1"].get<double>()).substr(0, 6);
            text += "\n";
        }
        atomic_write(out / "metrics.txt", text);
    });

    const Granularity ag = config.attribution_granularity;
    if (config.attribute) {
        if (!train_keys.contains(ag)) {
            warn("ig.granularity " + std::string(to_string(ag)) + " is not trained; skipping attribution");
        } else {
            const std::string attr_key = stage_key("attribute",
                                                   {{"steps", config.ig.steps},
                                                    {"baseline", std::string(to_string(config.ig.baseline))},
                                                    {"partition", std::string(to_string(config.attribution_partition))},
                                                    {"top_k", config.top_k},
                                                    {"html_documents", config.html_documents}},
                                                   {train_keys[ag]});
            runner.run("attribute", "attribution", attr_key, [&](const fs::path& out) {
                const auto ckpt = load_checkpoint(model_path(ag), vocab.digest());
                const auto docs = read_partition(prepared_dir, ag, config.attribution_partition);
                std::vector<DocumentAttribution> per_doc;
                const auto table = aggregate_token_attributions(ckpt.params, vocab, docs, config.ig, ckpt.hyper.max_len,
                                                                &per_doc, config.threads);
                write_table_csv(table, out / "table.csv");
                write_attributions_jsonl(per_doc, out / "attributions.jsonl");
                double max_gap = 0.0;
                double sum_gap = 0.0;
                for (const auto& d : per_doc) {
                    max_gap = std::max(max_gap, d.completeness_gap);
                    sum_gap += d.completeness_gap;
                }
                nlohmann::json summary = {{"documents", per_doc.size()},
                                          {"max_completeness_gap", max_gap},
                                          {"mean_completeness_gap", per_doc.empty() ? 0.0 : sum_gap / per_doc.size()}};
                if (!table.rows.empty()) {
                    const auto lists = top_polarized(table, config.top_k);
                    atomic_write(out / "top_tokens.txt", format_polarized(lists));
                    auto rows_json = [](const std::vector<PolarizedRow>& rows) {
                        nlohmann::json a = nlohmann::json::array();
                        for (const auto& r : rows) a.push_back({{"token", r.token}, {"score", r.mean_score}, {"n", r.n}});
                        return a;
                    };
                    summary["masculine"] = rows_json(lists.masculine);
                    summary["feminine"] = rows_json(lists.feminine);
                    summary["truncated"] = lists.truncated;
                    summary["degenerate"] = lists.degenerate;
                }
                atomic_write(out / "summary.json", summary.dump(2) + "\n");
                std::map<std::string, const Document*> by_id;
                for (const auto& d : docs) by_id[d.doc_id] = &d;
                for (std::size_t i = 0; i < per_doc.size() && i < config.html_documents; ++i) {
                    const auto& d = per_doc[i];
                    atomic_write(out / "html" / (doc_file_name(d.doc_id) + ".html"),
                                 render_attribution_html(*by_id.at(d.doc_id), d.tokens));
                }
            });
        }
    }

    if (config.crossdress_db) {
        if (!train_keys.contains(Granularity::Scene))
            throw Error(ErrorKind::ConfigInvalid, "crossdress.db needs the scene granularity in run.granularities");
        const std::string key = stage_key("crossdress", {{"db", crossdress_digest}, {"min_words", config.min_words}},
                                          {train_keys[Granularity::Scene], prepare_key});
        runner.run("crossdress", "crossdress", key, [&](const fs::path& out) {
            const auto ckpt = load_checkpoint(model_path(Granularity::Scene), vocab.digest());
            const auto plays = load_corpus(prepared_dir / "masked", rules);
            const auto records = resolve_crossdress(crossdress_rows, plays);
            const auto report = crossdress_report(ckpt.params, vocab, ckpt.hyper.max_len, plays, records, config.min_words);
            atomic_write(out / "report.json", report.to_json().dump(2) + "\n");
            atomic_write(out / "report.html", report.to_html());
        });
    }

    atomic_write(work / "manifest.json", manifest.to_json().dump(2) + "\n");
    return manifest;
}

}  // namespace comedia
