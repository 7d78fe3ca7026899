#include "comedia/aggregate_eval.hpp"
#include "comedia/attribution.hpp"
#include "comedia/dataset.hpp"
#include "comedia/dracor_client.hpp"
#include "comedia/error.hpp"
#include "comedia/fsutil.hpp"
#include "comedia/model.hpp"
#include "comedia/pipeline.hpp"
#include "comedia/report.hpp"
#include "comedia/synthetic.hpp"
#include "comedia/tei_parser.hpp"
#include "comedia/tokenizer.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace fs = std::filesystem;
using namespace comedia;

namespace {

SegmentationRules rules_from(const std::string& path) {
    return path.empty() ? SegmentationRules::defaults() : SegmentationRules::load(path);
}

Granularity granularity_arg(const std::string& s) {
    const auto g = parse_granularity(s);
    if (!g) throw Error(ErrorKind::InvalidArgument, "unknown granularity '" + s + "'");
    return *g;
}

Partition partition_arg(const std::string& s) {
    const auto p = parse_partition(s);
    if (!p) throw Error(ErrorKind::InvalidArgument, "unknown partition '" + s + "'");
    return *p;
}

std::vector<Play> load_plays(const fs::path& path, const SegmentationRules& rules) {
    if (fs::is_directory(path)) return load_corpus(path, rules);
    const auto text = read_file(path);
    if (path.extension() == ".json") return {play_from_json(nlohmann::json::parse(text))};
    return {segment_scenes(parse_play(text, path.stem().string()), rules)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gender classification and attribution for TEI drama corpora"};
    app.require_subcommand(1);

    // fetch
    auto* fetch = app.add_subcommand("fetch", "Download a DraCor corpus into the local cache");
    std::string corpus_id = kDefaultCorpus, cache_dir, api_base = kDefaultApiBase, tei_dir;
    bool offline = false;
    fetch->add_option("--corpus", corpus_id, "Corpus id")->capture_default_str();
    fetch->add_option("--cache", cache_dir, "Cache directory")->required();
    fetch->add_option("--api", api_base, "API base URL")->capture_default_str();
    fetch->add_flag("--offline", offline, "Read TEI files from --tei-dir instead of the API");
    fetch->add_option("--tei-dir", tei_dir, "Local TEI directory for --offline");

    // parse
    auto* parse = app.add_subcommand("parse", "Parse TEI into play JSON");
    std::string tei_path, out_dir, scene_rules;
    parse->add_option("--tei", tei_path, "TEI file or directory")->required();
    parse->add_option("--out", out_dir, "Output directory")->required();
    parse->add_option("--scene-rules", scene_rules, "Scene segmentation rules (JSON)");

    // prepare
    auto* prepare = app.add_subcommand("prepare", "Mask, filter and split a corpus into datasets");
    std::string corpus_dir, pin_db;
    std::vector<std::string> granularities;
    std::uint64_t seed = 0;
    std::size_t min_words = 30;
    prepare->add_option("--corpus", corpus_dir, "Directory of TEI or play JSON files")->required();
    prepare->add_option("--granularity", granularities, "utterance, scene or character (repeatable)");
    prepare->add_option("--seed", seed, "Split seed")->capture_default_str();
    prepare->add_option("--min-words", min_words, "Minimum words per character")->capture_default_str();
    prepare->add_option("--pin", pin_db, "Crossdress CSV whose characters go to validation");
    prepare->add_option("--scene-rules", scene_rules, "Scene segmentation rules (JSON)");
    prepare->add_option("--out", out_dir, "Output directory")->required();

    // tokenize
    auto* tokenize = app.add_subcommand("tokenize", "Train a BPE vocabulary");
    std::string train_jsonl;
    std::size_t vocab_size = kDefaultVocabSize;
    tokenize->add_option("--train", train_jsonl, "Training documents (JSONL)")->required();
    tokenize->add_option("--vocab-size", vocab_size, "Vocabulary size")->capture_default_str();
    tokenize->add_option("--out", out_dir, "Output directory")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a classifier on one granularity");
    std::string data_dir, granularity = "character", vocab_dir, model_path;
    Hyper hyper;
    train_cmd->add_option("--data", data_dir, "Prepared dataset directory")->required();
    train_cmd->add_option("--granularity", granularity, "utterance, scene or character")->capture_default_str();
    train_cmd->add_option("--vocab", vocab_dir, "Vocabulary directory")->required();
    train_cmd->add_option("--seed", hyper.seed, "Seed")->capture_default_str();
    train_cmd->add_option("--out", model_path, "Checkpoint path")->required();
    train_cmd->add_option("--lr", hyper.lr, "Learning rate")->capture_default_str();
    train_cmd->add_option("--batch-size", hyper.batch_size, "Batch size")->capture_default_str();
    train_cmd->add_option("--max-epochs", hyper.max_epochs, "Maximum epochs")->capture_default_str();
    train_cmd->add_option("--patience", hyper.patience, "Early-stopping patience")->capture_default_str();
    train_cmd->add_option("--embed-dim", hyper.embed_dim, "Embedding size")->capture_default_str();
    train_cmd->add_option("--hidden-dim", hyper.hidden_dim, "Hidden layer size")->capture_default_str();
    train_cmd->add_option("--max-len", hyper.max_len, "Maximum sequence length")->capture_default_str();

    // evaluate
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint");
    std::string aggregate = "none", partition = "test";
    std::size_t ranking_k = 10;
    evaluate_cmd->add_option("--model", model_path, "Checkpoint")->required();
    evaluate_cmd->add_option("--vocab", vocab_dir, "Vocabulary directory")->required();
    evaluate_cmd->add_option("--data", data_dir, "Prepared dataset directory")->required();
    evaluate_cmd->add_option("--granularity", granularity, "utterance, scene or character")->capture_default_str();
    evaluate_cmd->add_option("--aggregate", aggregate, "none, majority or gmean")->capture_default_str();
    evaluate_cmd->add_option("--partition", partition, "train, test or validation")->capture_default_str();
    evaluate_cmd->add_option("--top", ranking_k, "Confidence ranking size")->capture_default_str();
    evaluate_cmd->add_option("--out", out_dir, "Output directory")->required();

    // attribute
    auto* attribute = app.add_subcommand("attribute", "Integrated-gradients token attributions");
    std::string docs_jsonl, baseline = "all-pad";
    IGConfig ig;
    std::size_t threads = 0;
    attribute->add_option("--model", model_path, "Checkpoint")->required();
    attribute->add_option("--vocab", vocab_dir, "Vocabulary directory")->required();
    attribute->add_option("--data", docs_jsonl, "Documents (JSONL)")->required();
    attribute->add_option("--steps", ig.steps, "Riemann steps")->capture_default_str();
    attribute->add_option("--baseline", baseline, "all-pad or zero")->capture_default_str();
    attribute->add_option("--threads", threads, "Worker threads (0 = all cores)");
    attribute->add_option("--out", out_dir, "Output directory")->required();

    // tokens
    auto* tokens = app.add_subcommand("tokens", "Most polarized tokens of an attribution table");
    std::string table_csv;
    std::size_t top = 20;
    tokens->add_option("--table", table_csv, "Attribution table CSV")->required();
    tokens->add_option("--top", top, "Rows per list")->capture_default_str();

    // run
    auto* run = app.add_subcommand("run", "Run the whole pipeline from a config file");
    std::string config_path;
    run->add_option("--config", config_path, "INI config")->required();

    // report
    auto* report = app.add_subcommand("report", "Render reports");
    report->require_subcommand(1);
    auto* crossdress = report->add_subcommand("crossdress", "Scene-by-scene report for cross-dressing characters");
    std::string db_path;
    crossdress->add_option("--model", model_path, "Scene-level checkpoint")->required();
    crossdress->add_option("--vocab", vocab_dir, "Vocabulary directory")->required();
    crossdress->add_option("--corpus", corpus_dir, "Masked plays (prepared/masked)")->required();
    crossdress->add_option("--db", db_path, "Crossdress CSV")->required();
    crossdress->add_option("--min-words", min_words, "Cohort word filter")->capture_default_str();
    crossdress->add_option("--out", out_dir, "Output directory")->required();
    auto* report_attr = report->add_subcommand("attribution", "HTML rendering of one document's attributions");
    std::string attributions_jsonl, doc_id, out_file;
    report_attr->add_option("--attributions", attributions_jsonl, "attributions.jsonl from attribute")->required();
    report_attr->add_option("--data", docs_jsonl, "Documents (JSONL)")->required();
    report_attr->add_option("--doc", doc_id, "Document id")->required();
    report_attr->add_option("--out", out_file, "HTML path")->required();

    // synth
    auto* synth = app.add_subcommand("synth", "Write a synthetic TEI corpus with a known gender signal");
    SyntheticOptions synth_opts;
    synth->add_option("--seed", synth_opts.seed, "Seed")->capture_default_str();
    synth->add_option("--plays", synth_opts.plays, "Number of plays")->capture_default_str();
    synth->add_option("--characters", synth_opts.characters, "Number of characters")->capture_default_str();
    synth->add_option("--out", out_dir, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*fetch) {
            std::unique_ptr<Transport> transport;
            std::unique_ptr<CorpusSource> source;
            if (offline) {
                if (tei_dir.empty()) throw Error(ErrorKind::InvalidArgument, "--offline needs --tei-dir");
                source = std::make_unique<DirectorySource>(tei_dir);
            } else {
                transport = make_http_transport();
                source = std::make_unique<DracorApiSource>(*transport, api_base);
            }
            DracorClient client(*source);
            const auto r = client.sync_corpus(corpus_id, cache_dir);
            std::cout << "plays: " << r.manifest.plays.size() << ", downloaded: " << r.downloaded
                      << ", from cache: " << r.from_cache << ", failed: " << r.failed << "\n";
            for (const auto& [play, err] : r.manifest.errors) std::cout << "  " << play << ": " << err << "\n";
            return r.failed ? 1 : 0;
        }
        if (*parse) {
            const auto plays = load_plays(tei_path, rules_from(scene_rules));
            for (const auto& p : plays) {
                atomic_write(fs::path(out_dir) / (p.play_name + ".json"), to_json(p).dump() + "\n");
                std::size_t scenes = 0;
                for (const auto& a : p.acts) scenes += a.scenes.size();
                std::cout << p.play_name << ": " << p.cast.size() << " characters, " << p.acts.size() << " acts, "
                          << scenes << " scenes\n";
            }
            return 0;
        }
        if (*prepare) {
            PrepareOptions opts;
            opts.seed = seed;
            opts.min_words = min_words;
            if (!pin_db.empty())
                for (const auto& r : load_crossdress_db(pin_db)) opts.pinned_validation.insert({r.play_name, r.char_id});
            const auto corpus = load_corpus(corpus_dir, rules_from(scene_rules));
            const auto prepared = prepare_corpus(corpus, opts);
            std::vector<Granularity> gs;
            for (const auto& g : granularities) gs.push_back(granularity_arg(g));
            if (gs.empty()) gs = {Granularity::Character, Granularity::Scene, Granularity::Utterance};
            write_prepared(prepared, gs, out_dir);
            const auto sizes = prepared.split.sizes();
            std::cout << "characters: " << prepared.stats.characters << " (male " << prepared.stats.male.count
                      << ", female " << prepared.stats.female.count << "); split train/test/validation: " << sizes[0]
                      << "/" << sizes[1] << "/" << sizes[2] << "; masked names: "
                      << prepared.mask_report.masked_names.size() << "\n";
            return 0;
        }
        if (*tokenize) {
            std::vector<std::string> texts;
            for (const auto& d : read_documents(train_jsonl)) texts.push_back(d.text);
            const auto vocab = train_bpe(texts, vocab_size);
            vocab.save(out_dir);
            std::cout << "vocabulary: " << vocab.size() << " pieces, " << vocab.merges().size() << " merges, digest "
                      << vocab.digest() << "\n";
            return 0;
        }
        if (*train_cmd) {
            const auto g = granularity_arg(granularity);
            const auto vocab = Vocab::load(vocab_dir);
            TrainLog log;
            const auto ckpt = train(read_documents(dataset_file(data_dir, g, Partition::Train)),
                                    read_documents(dataset_file(data_dir, g, Partition::Validation)), vocab, hyper, &log);
            save_checkpoint(ckpt, model_path);
            std::cout << "initial loss " << log.initial_loss << "\n";
            for (const auto& e : log.epochs)
                std::cout << "epoch " << e.epoch << ": loss " << e.train_loss << ", validation macro-F1 "
                          << e.val_macro_f1 << "\n";
            std::cout << "best epoch " << ckpt.best_epoch << ", macro-F1 " << ckpt.val_macro_f1 << "\n";
            return 0;
        }
        if (*evaluate_cmd) {
            const auto g = granularity_arg(granularity);
            const auto agg = parse_aggregation(aggregate);
            if (!agg) throw Error(ErrorKind::InvalidArgument, "unknown aggregation '" + aggregate + "'");
            if (*agg == Aggregation::None && g != Granularity::Character)
                std::cerr << "note: --aggregate none on " << granularity << " reports document-level metrics\n";
            const auto vocab = Vocab::load(vocab_dir);
            const auto ckpt = load_checkpoint(model_path, vocab.digest());
            const auto docs = read_documents(dataset_file(data_dir, g, partition_arg(partition)));
            const auto r = evaluate_model(ckpt.params, vocab, ckpt.hyper.max_len, docs, g);
            const Metrics& chosen = *agg == Aggregation::Majority && r.majority ? *r.majority
                                    : *agg == Aggregation::GeometricMean && r.gmean ? *r.gmean
                                                                                    : r.document_metrics;
            auto j = r.to_json(ranking_k);
            j["selected"] = {{"aggregate", std::string(to_string(*agg))}, {"metrics", chosen.to_json()}};
            atomic_write(fs::path(out_dir) / "metrics.json", j.dump(2) + "\n");
            const auto table = format_metrics_rows({{granularity + "/" + aggregate, chosen}, {"most-frequent", r.baseline}});
            atomic_write(fs::path(out_dir) / "metrics.txt", table);
            std::cout << table;
            return 0;
        }
        if (*attribute) {
            const auto b = parse_baseline(baseline);
            if (!b) throw Error(ErrorKind::InvalidArgument, "unknown baseline '" + baseline + "'");
            ig.baseline = *b;
            const auto vocab = Vocab::load(vocab_dir);
            const auto ckpt = load_checkpoint(model_path, vocab.digest());
            std::vector<DocumentAttribution> per_doc;
            const auto table = aggregate_token_attributions(ckpt.params, vocab, read_documents(docs_jsonl), ig,
                                                            ckpt.hyper.max_len, &per_doc, threads);
            write_table_csv(table, fs::path(out_dir) / "table.csv");
            write_attributions_jsonl(per_doc, fs::path(out_dir) / "attributions.jsonl");
            double max_gap = 0.0;
            for (const auto& d : per_doc) max_gap = std::max(max_gap, d.completeness_gap);
            std::cout << per_doc.size() << " documents, " << table.rows.size()
                      << " distinct tokens, max completeness gap " << max_gap << "\n";
            return 0;
        }
        if (*tokens) {
            std::cout << format_polarized(top_polarized(read_table_csv(table_csv), top));
            return 0;
        }
        if (*run) {
            const auto config = PipelineConfig::load(config_path);
            const auto manifest = run_pipeline(config);
            for (const auto& s : manifest.stages)
                std::cout << s.name << ": " << (s.cached ? "cached" : "ran") << "\n";
            std::cout << "manifest: " << (config.work_dir / "manifest.json").string() << "\n";
            return 0;
        }
        if (*crossdress) {
            const auto vocab = Vocab::load(vocab_dir);
            const auto ckpt = load_checkpoint(model_path, vocab.digest());
            const auto plays = load_corpus(corpus_dir, SegmentationRules::defaults());
            const auto records = resolve_crossdress(load_crossdress_db(db_path), plays);
            const auto r = crossdress_report(ckpt.params, vocab, ckpt.hyper.max_len, plays, records, min_words);
            atomic_write(fs::path(out_dir) / "report.json", r.to_json().dump(2) + "\n");
            atomic_write(fs::path(out_dir) / "report.html", r.to_html());
            for (const auto& c : r.characters) {
                std::cout << c.key.str() << ": " << to_string(c.decision.label) << " (" << c.decision.confidence << ")";
                if (c.agreement) std::cout << ", agreement " << *c.agreement;
                std::cout << "\n";
            }
            std::cout << "mean confidence: cross-dressing " << r.mean_confidence_crossdressers << ", other female "
                      << r.mean_confidence_cohort << "\n";
            return 0;
        }
        if (*report_attr) {
            const Document* doc = nullptr;
            const auto docs = read_documents(docs_jsonl);
            for (const auto& d : docs)
                if (d.doc_id == doc_id) doc = &d;
            if (!doc) throw Error(ErrorKind::InvalidArgument, "document " + doc_id + " not in " + docs_jsonl);
            for (const auto& a : read_attributions_jsonl(attributions_jsonl)) {
                if (a.doc_id != doc_id) continue;
                atomic_write(out_file, render_attribution_html(*doc, a.tokens));
                return 0;
            }
            throw Error(ErrorKind::InvalidArgument, "no attributions for " + doc_id);
        }
        if (*synth) {
            const auto corpus = generate_synthetic(synth_opts);
            write_synthetic(corpus, out_dir);
            std::cout << corpus.plays.size() << " plays, " << corpus.characters.size() << " characters\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
