#pragma once

#include "comedia/dataset.hpp"
#include "comedia/prediction.hpp"

#include "json.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace comedia {

enum class Aggregation { None, Majority, GeometricMean };

std::string_view to_string(Aggregation a);
/// Accepts "none", "majority", "gmean".
std::optional<Aggregation> parse_aggregation(std::string_view text);

struct AggregateDecision {
    CharKey char_key;
    Aggregation method = Aggregation::None;
    /// Per-class geometric means, index 0 Male. Not renormalized.
    std::optional<std::array<double, 2>> gm_scores;
    std::optional<std::array<std::size_t, 2>> vote_counts;
    Gender label = Gender::Male;
    double confidence = 0.0;
    std::size_t inputs = 0;
};

/// More predicted labels wins; a tie falls back to the geometric-mean
/// decision. Confidence is the winning share of votes.
AggregateDecision majority_vote(std::span<const Prediction> preds);

/// exp(mean log p) per class, argmax decides (tie -> Male).
AggregateDecision geometric_mean(std::span<const Prediction> preds);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool precision_undefined = false;  // class never predicted
    bool recall_undefined = false;     // class absent from gold
};

struct Metrics {
    ClassMetrics male;
    ClassMetrics female;
    ClassMetrics macro;
    std::size_t support_male = 0;
    std::size_t support_female = 0;

    const ClassMetrics& per_class(Gender g) const { return g == Gender::Female ? female : male; }
    nlohmann::json to_json() const;
};

struct LabeledPrediction {
    Gender gold = Gender::Male;
    Gender label = Gender::Male;
};

Metrics evaluate(std::span<const LabeledPrediction> preds);

/// Predicts Male for every instance.
Metrics most_frequent_baseline(std::span<const Gender> golds);

struct LengthLabeled {
    std::size_t word_count = 0;
    Gender gold = Gender::Male;
    Gender label = Gender::Male;
};

struct QuartileTable {
    std::array<std::pair<std::size_t, std::size_t>, 4> boundaries{};  // min-max word count
    std::array<std::size_t, 4> sizes{};
    std::array<double, 4> f1_per_quartile{};

    nlohmann::json to_json() const;
};

/// Sort by word count, cut into four contiguous near-equal groups (earlier
/// groups take the remainder), macro-F1 per group.
QuartileTable quartile_f1(std::vector<LengthLabeled> items);

struct RankedDecision {
    AggregateDecision decision;
    Gender gold = Gender::Male;

    bool correct() const { return decision.label == gold; }
};

/// (top_correct, top_incorrect), each sorted by confidence descending.
std::pair<std::vector<RankedDecision>, std::vector<RankedDecision>> confidence_ranking(
    std::vector<RankedDecision> decisions, std::size_t k = 10);

/// Groups per-document predictions by character (first-seen order) and
/// aggregates each group. With Aggregation::None every group must hold a
/// single document (character granularity).
std::vector<AggregateDecision> aggregate_by_character(const std::vector<Document>& docs,
                                                      const std::vector<Prediction>& preds, Aggregation method);

/// Gold gender per character key, from the documents.
std::vector<RankedDecision> attach_gold(const std::vector<AggregateDecision>& decisions,
                                        const std::vector<Document>& docs);

Metrics evaluate_decisions(const std::vector<RankedDecision>& decisions);
Metrics evaluate_documents(const std::vector<Document>& docs, const std::vector<Prediction>& preds);

/// Aligned-text rendering: one row per (level, method) with P/R/F1 and the
/// per-gender F1 columns.
std::string format_metrics_rows(const std::vector<std::pair<std::string, Metrics>>& rows);

}  // namespace comedia
