#include "comedia/aggregate_eval.hpp"

#include "comedia/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

namespace comedia {
namespace {

ClassMetrics class_metrics(std::size_t tp, std::size_t fp, std::size_t fn) {
    ClassMetrics m;
    const auto predicted = tp + fp;
    const auto actual = tp + fn;
    m.precision_undefined = predicted == 0;
    m.recall_undefined = actual == 0;
    m.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    m.recall = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    const double denom = m.precision + m.recall;
    m.f1 = denom > 0 ? 2.0 * m.precision * m.recall / denom : 0.0;
    return m;
}

nlohmann::json class_json(const ClassMetrics& m) {
    nlohmann::json j = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
    if (m.precision_undefined) j["precision_undefined"] = true;
    if (m.recall_undefined) j["recall_undefined"] = true;
    return j;
}

}  // namespace

std::string_view to_string(Aggregation a) {
    switch (a) {
        case Aggregation::None: return "none";
        case Aggregation::Majority: return "majority";
        case Aggregation::GeometricMean: return "gmean";
    }
    return "none";
}

std::optional<Aggregation> parse_aggregation(std::string_view text) {
    if (text == "none") return Aggregation::None;
    if (text == "majority") return Aggregation::Majority;
    if (text == "gmean") return Aggregation::GeometricMean;
    return std::nullopt;
}

AggregateDecision geometric_mean(std::span<const Prediction> preds) {
    if (preds.empty()) throw Error(ErrorKind::EmptyInput, "geometric mean of no predictions");
    std::array<double, 2> log_sum{0.0, 0.0};
    for (const auto& p : preds) {
        for (int c = 0; c < 2; ++c) {
            if (!(p.probs[c] > 0.0)) throw Error(ErrorKind::ZeroProbability, "probability must be strictly positive");
            log_sum[c] += std::log(p.probs[c]);
        }
    }
    const double x = static_cast<double>(preds.size());
    AggregateDecision d;
    d.method = Aggregation::GeometricMean;
    d.gm_scores = std::array<double, 2>{std::exp(log_sum[0] / x), std::exp(log_sum[1] / x)};
    d.label = (*d.gm_scores)[1] > (*d.gm_scores)[0] ? Gender::Female : Gender::Male;
    d.confidence = (*d.gm_scores)[class_index(d.label)];
    d.inputs = preds.size();
    return d;
}

AggregateDecision majority_vote(std::span<const Prediction> preds) {
    if (preds.empty()) throw Error(ErrorKind::EmptyInput, "majority vote over no predictions");
    std::array<std::size_t, 2> votes{0, 0};
    for (const auto& p : preds) ++votes[class_index(p.label)];
    AggregateDecision d;
    d.method = Aggregation::Majority;
    d.vote_counts = votes;
    d.inputs = preds.size();
    if (votes[0] == votes[1]) {
        const auto gm = geometric_mean(preds);
        d.gm_scores = gm.gm_scores;
        d.label = gm.label;
    } else {
        d.label = votes[1] > votes[0] ? Gender::Female : Gender::Male;
    }
    d.confidence = static_cast<double>(votes[class_index(d.label)]) / static_cast<double>(preds.size());
    return d;
}

nlohmann::json Metrics::to_json() const {
    return {{"male", class_json(male)},
            {"female", class_json(female)},
            {"macro", class_json(macro)},
            {"support", {{"male", support_male}, {"female", support_female}}}};
}

Metrics evaluate(std::span<const LabeledPrediction> preds) {
    if (preds.empty()) throw Error(ErrorKind::EmptyInput, "evaluate() needs at least one prediction");
    // confusion[gold][label]
    std::array<std::array<std::size_t, 2>, 2> confusion{};
    for (const auto& p : preds) ++confusion[class_index(p.gold)][class_index(p.label)];
    Metrics m;
    m.male = class_metrics(confusion[0][0], confusion[1][0], confusion[0][1]);
    m.female = class_metrics(confusion[1][1], confusion[0][1], confusion[1][0]);
    m.macro.precision = (m.male.precision + m.female.precision) / 2.0;
    m.macro.recall = (m.male.recall + m.female.recall) / 2.0;
    m.macro.f1 = (m.male.f1 + m.female.f1) / 2.0;
    m.macro.precision_undefined = m.male.precision_undefined || m.female.precision_undefined;
    m.macro.recall_undefined = m.male.recall_undefined || m.female.recall_undefined;
    m.support_male = confusion[0][0] + confusion[0][1];
    m.support_female = confusion[1][0] + confusion[1][1];
    return m;
}

Metrics most_frequent_baseline(std::span<const Gender> golds) {
    std::vector<LabeledPrediction> preds;
    preds.reserve(golds.size());
    for (const auto g : golds) preds.push_back({g, Gender::Male});
    return evaluate(preds);
}

nlohmann::json QuartileTable::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t q = 0; q < 4; ++q) {
        rows.push_back({{"quartile", "Q" + std::to_string(q + 1)},
                        {"min_words", boundaries[q].first},
                        {"max_words", boundaries[q].second},
                        {"size", sizes[q]},
                        {"macro_f1", f1_per_quartile[q]}});
    }
    return rows;
}

QuartileTable quartile_f1(std::vector<LengthLabeled> items) {
    if (items.size() < 4) throw Error(ErrorKind::TooFewCharacters, "quartiles need at least four items");
    std::stable_sort(items.begin(), items.end(),
                     [](const LengthLabeled& a, const LengthLabeled& b) { return a.word_count < b.word_count; });
    QuartileTable table;
    const std::size_t base = items.size() / 4;
    const std::size_t extra = items.size() % 4;
    std::size_t begin = 0;
    for (std::size_t q = 0; q < 4; ++q) {
        const std::size_t size = base + (q < extra ? 1 : 0);
        std::vector<LabeledPrediction> group;
        for (std::size_t i = begin; i < begin + size; ++i) group.push_back({items[i].gold, items[i].label});
        table.sizes[q] = size;
        table.boundaries[q] = {items[begin].word_count, items[begin + size - 1].word_count};
        table.f1_per_quartile[q] = evaluate(group).macro.f1;
        begin += size;
    }
    return table;
}

std::pair<std::vector<RankedDecision>, std::vector<RankedDecision>> confidence_ranking(
    std::vector<RankedDecision> decisions, std::size_t k) {
    std::vector<RankedDecision> correct;
    std::vector<RankedDecision> incorrect;
    for (auto& d : decisions) (d.correct() ? correct : incorrect).push_back(std::move(d));
    auto by_confidence = [](const RankedDecision& a, const RankedDecision& b) {
        if (a.decision.confidence != b.decision.confidence) return a.decision.confidence > b.decision.confidence;
        return a.decision.char_key < b.decision.char_key;
    };
    for (auto* list : {&correct, &incorrect}) {
        std::sort(list->begin(), list->end(), by_confidence);
        if (list->size() > k) list->resize(k);
    }
    return {std::move(correct), std::move(incorrect)};
}

std::vector<AggregateDecision> aggregate_by_character(const std::vector<Document>& docs,
                                                      const std::vector<Prediction>& preds, Aggregation method) {
    if (docs.size() != preds.size())
        throw Error(ErrorKind::InvalidArgument, "documents and predictions differ in length");
    std::vector<CharKey> order;
    std::map<CharKey, std::vector<Prediction>> groups;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        auto [it, inserted] = groups.try_emplace(docs[i].key());
        if (inserted) order.push_back(docs[i].key());
        it->second.push_back(preds[i]);
    }
    std::vector<AggregateDecision> out;
    for (const auto& key : order) {
        const auto& group = groups[key];
        AggregateDecision d;
        switch (method) {
            case Aggregation::None:
                if (group.size() != 1)
                    throw Error(ErrorKind::InvalidArgument,
                                key.str() + " has several documents; choose majority or gmean aggregation");
                d.method = Aggregation::None;
                d.label = group.front().label;
                d.confidence = group.front().confidence;
                d.inputs = 1;
                break;
            case Aggregation::Majority: d = majority_vote(group); break;
            case Aggregation::GeometricMean: d = geometric_mean(group); break;
        }
        d.char_key = key;
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<RankedDecision> attach_gold(const std::vector<AggregateDecision>& decisions,
                                        const std::vector<Document>& docs) {
    std::map<CharKey, Gender> gold;
    for (const auto& d : docs) gold.emplace(d.key(), d.gold_gender);
    std::vector<RankedDecision> out;
    for (const auto& d : decisions) {
        const auto it = gold.find(d.char_key);
        if (it == gold.end()) throw Error(ErrorKind::UnknownCharacter, d.char_key.str());
        out.push_back({d, it->second});
    }
    return out;
}

Metrics evaluate_decisions(const std::vector<RankedDecision>& decisions) {
    std::vector<LabeledPrediction> pairs;
    for (const auto& d : decisions) pairs.push_back({d.gold, d.decision.label});
    return evaluate(pairs);
}

Metrics evaluate_documents(const std::vector<Document>& docs, const std::vector<Prediction>& preds) {
    if (docs.size() != preds.size())
        throw Error(ErrorKind::InvalidArgument, "documents and predictions differ in length");
    std::vector<LabeledPrediction> pairs;
    for (std::size_t i = 0; i < docs.size(); ++i) pairs.push_back({docs[i].gold_gender, preds[i].label});
    return evaluate(pairs);
}

std::string format_metrics_rows(const std::vector<std::pair<std::string, Metrics>>& rows) {
    std::ostringstream out;
    out << std::left << std::setw(26) << "input/aggregation" << std::right << std::setw(10) << "precision"
        << std::setw(10) << "recall" << std::setw(10) << "macro-F1" << std::setw(10) << "F1 male" << std::setw(10)
        << "F1 female" << '\n';
    out << std::fixed << std::setprecision(4);
    for (const auto& [name, m] : rows) {
        out << std::left << std::setw(26) << name << std::right << std::setw(10) << m.macro.precision << std::setw(10)
            << m.macro.recall << std::setw(10) << m.macro.f1 << std::setw(10) << m.male.f1 << std::setw(10)
            << m.female.f1 << '\n';
    }
    return out.str();
}

}  // namespace comedia
