#pragma once

#include "comedia/gender.hpp"
#include "comedia/tei_parser.hpp"

#include "json.hpp"

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace comedia {

enum class Granularity { Utterance, Scene, Character };

std::string_view to_string(Granularity g);
std::optional<Granularity> parse_granularity(std::string_view text);

struct CharKey {
    std::string play_name;
    std::string char_id;

    auto operator<=>(const CharKey&) const = default;
    std::string str() const { return play_name + "/" + char_id; }
};

struct Document {
    std::string doc_id;
    std::string play_name;
    std::string char_id;
    Granularity granularity = Granularity::Character;
    int act = 0;
    int scene = 0;
    std::string text;
    Gender gold_gender = Gender::Male;
    std::size_t word_count = 0;

    CharKey key() const { return {play_name, char_id}; }
};

nlohmann::json to_json(const Document& doc);
Document document_from_json(const nlohmann::json& j);

void write_documents(const std::filesystem::path& path, const std::vector<Document>& docs);
std::vector<Document> read_documents(const std::filesystem::path& path);

struct MaskReport {
    std::set<std::string> masked_names;
    std::set<std::string> single_play_tokens;
    /// Original surface form -> number of occurrences replaced.
    std::map<std::string, std::size_t> replacement_counts;

    nlohmann::json to_json() const;
};

/// Every cast display name across the corpus, plus its capitalized form
/// ("DON JUAN" also yields "Don Juan"). Special literals are never included.
std::set<std::string> build_name_mask_list(const std::vector<Play>& corpus);

/// Rewrites utterance text with punctuation detached, names replaced by
/// [NAME] and single-play word types by [MASK]. Word counts keep their
/// parse-time values.
std::pair<std::vector<Play>, MaskReport> mask_corpus(std::vector<Play> corpus, const std::set<std::string>& names);

struct EligibleCharacter {
    CharKey key;
    Character character;
    std::size_t word_count = 0;
};

/// Male/Female characters speaking at least `min_words` words, in corpus and
/// cast order.
std::vector<EligibleCharacter> filter_characters(const std::vector<Play>& corpus, std::size_t min_words = 30);

std::vector<Document> make_documents(const std::vector<Play>& corpus, const std::vector<EligibleCharacter>& eligible,
                                     Granularity granularity);

enum class Partition { Train, Test, Validation };

std::string_view to_string(Partition p);
std::optional<Partition> parse_partition(std::string_view text);

struct SplitRatios {
    double train = 0.8;
    double test = 0.1;
    double validation = 0.1;
};

struct SplitSpec {
    std::uint64_t seed = 0;
    SplitRatios ratios;
    std::map<CharKey, Partition> assignment;

    Partition partition_of(const CharKey& key) const;
    std::array<std::size_t, 3> sizes() const;
    nlohmann::json to_json() const;
    static SplitSpec from_json(const nlohmann::json& j);
};

/// Train and test take floor(ratio * n); validation takes the rest.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios);

/// Seeded Fisher-Yates shuffle of the sorted keys, then contiguous
/// assignment train -> test -> validation. Keys in `pinned_validation` are
/// swapped into the validation block without changing partition sizes.
SplitSpec split_characters(std::vector<CharKey> chars, std::uint64_t seed, const SplitRatios& ratios = {},
                           const std::set<CharKey>& pinned_validation = {});

struct GenderStats {
    std::size_t count = 0;
    double mean_words = 0.0;
    std::size_t min_words = 0;
    std::size_t max_words = 0;
};

struct CorpusStats {
    GenderStats male;
    GenderStats female;
    std::size_t characters = 0;

    nlohmann::json to_json() const;
};

CorpusStats corpus_stats(const std::vector<EligibleCharacter>& eligible);

struct PrepareOptions {
    std::size_t min_words = 30;
    std::uint64_t seed = 0;
    SplitRatios ratios;
    std::set<CharKey> pinned_validation;
};

struct PreparedCorpus {
    std::vector<Play> masked;
    MaskReport mask_report;
    std::vector<EligibleCharacter> eligible;
    SplitSpec split;
    CorpusStats stats;

    /// Documents of one granularity restricted to one partition.
    std::vector<Document> documents(Granularity g, Partition p) const;
};

/// Mask on the full corpus, filter, split at character level.
PreparedCorpus prepare_corpus(const std::vector<Play>& corpus, const PrepareOptions& options);

/// Writes <out>/<granularity>/<partition>.jsonl for each requested
/// granularity, masked/<play>.json, mask_report.json, split.json and
/// stats.json.
void write_prepared(const PreparedCorpus& prepared, const std::vector<Granularity>& granularities,
                    const std::filesystem::path& out_dir);

std::filesystem::path dataset_file(const std::filesystem::path& data_dir, Granularity g, Partition p);

}  // namespace comedia
