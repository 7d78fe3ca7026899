#pragma once

#include "comedia/aggregate_eval.hpp"
#include "comedia/attribution.hpp"
#include "comedia/dataset.hpp"
#include "comedia/model.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace comedia {

/// Self-contained XHTML: one span per word (subword pieces joined, `##`
/// stripped). Blue for positive scores, orange for negative, alpha =
/// |score| / max |score| over the document. Throws MisalignedAttribution when
/// the attributions do not belong to `doc` or are not in position order.
std::string render_attribution_html(const Document& doc, const std::vector<TokenAttribution>& attrs);

enum class FlagSource { StageDirection, Database };

std::string_view to_string(FlagSource s);

/// One database line. scene == 0 means every scene of `act`.
struct CrossdressRow {
    std::string play_name;
    std::string char_id;
    int act = 0;
    int scene = 0;
    bool crossdressing = false;
    FlagSource source = FlagSource::Database;
};

/// Columns play,character,act,scene,flag,source; scene may be "*"; flag is
/// 1/0 (or true/false); source is StageDirection or Database.
std::vector<CrossdressRow> load_crossdress_db(const std::filesystem::path& path);

struct SceneFlag {
    int act = 0;
    int scene = 0;
    bool crossdressing = false;
    FlagSource source = FlagSource::Database;
};

struct CrossdressRecord {
    std::string play_name;
    std::string char_id;
    std::vector<SceneFlag> scenes;
};

/// Expands wildcards against the segmented plays and applies the precedence
/// rule: a stage-direction row replaces a database row for the same scene.
/// Throws CharacterNotFound or SceneIndexMismatch.
std::vector<CrossdressRecord> resolve_crossdress(const std::vector<CrossdressRow>& rows,
                                                 const std::vector<Play>& plays);

struct SceneReport {
    int act = 0;
    int scene = 0;
    bool crossdressing = false;
    std::optional<FlagSource> source;
    Prediction prediction;
};

struct CharacterCrossdress {
    CharKey key;
    std::string display_name;
    std::vector<SceneReport> scenes;
    AggregateDecision decision;  // geometric mean over scenes
    Gender gold = Gender::Female;
    std::size_t flagged_scenes = 0;
    /// Share of flagged scenes predicted Male; absent with no flagged scene.
    std::optional<double> agreement;
    /// Share of unflagged scenes predicted Male; absent with none.
    std::optional<double> male_rate_unflagged;
};

struct CohortMember {
    CharKey key;
    std::string display_name;
    double confidence = 0.0;
    bool correct = false;
};

struct CrossdressReport {
    std::vector<CharacterCrossdress> characters;
    std::vector<CohortMember> crossdressers;
    std::vector<CohortMember> cohort;  // other Female characters of the same plays
    double mean_confidence_crossdressers = 0.0;
    double mean_confidence_cohort = 0.0;
    double accuracy_crossdressers = 0.0;
    double accuracy_cohort = 0.0;

    nlohmann::json to_json() const;
    std::string to_html() const;
};

/// Scene-level predictions for every record's character, geometric-mean
/// character decisions, and cohort statistics. Characters below `min_words`
/// are still reported when listed in `records`.
CrossdressReport crossdress_report(const Params& params, const Vocab& vocab, std::size_t max_len,
                                   const std::vector<Play>& masked_plays, const std::vector<CrossdressRecord>& records,
                                   std::size_t min_words = 30);

}  // namespace comedia
