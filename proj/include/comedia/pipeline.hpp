#pragma once

#include "comedia/aggregate_eval.hpp"
#include "comedia/attribution.hpp"
#include "comedia/dataset.hpp"
#include "comedia/dracor_client.hpp"
#include "comedia/model.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace comedia {

enum class SourceKind { Api, Directory };

/// INI file; see README for the schema. Relative paths resolve against the
/// config file's directory.
struct PipelineConfig {
    SourceKind source = SourceKind::Directory;
    std::string corpus_id = kDefaultCorpus;
    std::string api_base = kDefaultApiBase;
    std::filesystem::path tei_dir;
    std::optional<std::filesystem::path> segmentation_rules;

    std::filesystem::path cache_dir;
    std::filesystem::path work_dir;

    std::uint64_t seed = 0;
    std::vector<Granularity> granularities = {Granularity::Character, Granularity::Scene, Granularity::Utterance};
    std::size_t threads = 0;

    std::size_t min_words = 30;
    SplitRatios ratios;

    std::size_t vocab_size = 0;
    std::size_t max_len = kDefaultMaxLen;

    Hyper hyper;

    bool attribute = true;
    IGConfig ig;
    Granularity attribution_granularity = Granularity::Utterance;
    Partition attribution_partition = Partition::Validation;
    std::size_t top_k = 20;
    std::size_t html_documents = 5;

    Partition eval_partition = Partition::Test;
    std::size_t ranking_k = 10;

    std::optional<std::filesystem::path> crossdress_db;
    bool pin_crossdressers = true;

    /// Throws ConfigInvalid naming the missing or malformed field.
    static PipelineConfig load(const std::filesystem::path& path);
    static PipelineConfig parse(const std::string& ini_text, const std::filesystem::path& base_dir);
    nlohmann::json to_json() const;
};

struct StageRecord {
    std::string name;
    std::string key;
    bool cached = false;
    std::map<std::string, std::string> outputs;  // path relative to work dir -> sha256
};

struct RunManifest {
    std::string created_at;
    std::string config_digest;
    std::uint64_t seed = 0;
    std::vector<StageRecord> stages;

    nlohmann::json to_json() const;
};

/// fetch -> parse -> prepare -> tokenize -> train -> evaluate -> attribute
/// (-> crossdress). Each stage is skipped when its key (a digest of its inputs
/// and settings) matches the stamp left by a previous run and its outputs are
/// intact. Writes <work>/manifest.json. `transport` replaces the HTTP client
/// for API sources.
RunManifest run_pipeline(const PipelineConfig& config, Transport* transport = nullptr);

/// Predictions and metrics for one trained granularity on one partition.
struct EvaluationResult {
    Granularity granularity = Granularity::Character;
    std::vector<Document> documents;
    std::vector<Prediction> predictions;
    Metrics document_metrics;
    Metrics baseline;
    std::optional<Metrics> majority;
    std::optional<Metrics> gmean;
    std::vector<RankedDecision> decisions;  // gmean for scene/utterance, direct for character
    std::optional<QuartileTable> quartiles;

    nlohmann::json to_json(std::size_t ranking_k) const;
};

EvaluationResult evaluate_model(const Params& params, const Vocab& vocab, std::size_t max_len,
                                const std::vector<Document>& docs, Granularity granularity);

}  // namespace comedia
