#pragma once

#include "comedia/dataset.hpp"
#include "comedia/model.hpp"
#include "comedia/tokenizer.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace comedia {

/// Signed score; positive leans Male, negative leans Female.
struct TokenAttribution {
    std::string doc_id;
    std::size_t position = 0;
    std::string token;
    double score = 0.0;
};

enum class Baseline { AllPad, ZeroEmbedding };

std::string_view to_string(Baseline b);
std::optional<Baseline> parse_baseline(std::string_view text);

struct IGConfig {
    std::size_t steps = 128;
    Baseline baseline = Baseline::AllPad;

    void validate() const;
};

/// A scalar function of an L x D input with its gradient.
class Differentiable {
public:
    virtual ~Differentiable() = default;
    virtual double value(const Matrix& x) const = 0;
    virtual Matrix gradient(const Matrix& x) const = 0;
};

/// logit(Male) - logit(Female) of the model, as a function of the embedded
/// rows it mean-pools.
class ModelScore final : public Differentiable {
public:
    explicit ModelScore(const Params& params) : params_(params) {}
    double value(const Matrix& x) const override;
    Matrix gradient(const Matrix& x) const override;

private:
    const Params& params_;
};

/// F(x) = sum(w * x).
class LinearScore final : public Differentiable {
public:
    explicit LinearScore(Matrix weights) : weights_(std::move(weights)) {}
    double value(const Matrix& x) const override;
    Matrix gradient(const Matrix& x) const override;

private:
    Matrix weights_;
};

/// Per-coordinate IG with a right Riemann sum over k/m, k = 1..m.
Matrix integrated_gradients(const Differentiable& f, const Matrix& input, const Matrix& baseline, std::size_t steps);

/// |sum(ig) - (F(input) - F(baseline))|.
double completeness_gap(const Differentiable& f, const Matrix& input, const Matrix& baseline, const Matrix& ig);

/// Embedded rows of the attended prefix of `seq`.
Matrix embed(const Params& params, const TokenSeq& seq);
Matrix baseline_for(const Params& params, const TokenSeq& seq, Baseline baseline);

/// One attribution per attended token: the row sum of its IG coordinates.
/// Token strings come from `vocab` when given, else the numeric id.
std::vector<TokenAttribution> integrated_gradients(const Params& params, const TokenSeq& seq, const IGConfig& cfg,
                                                   const Vocab* vocab = nullptr, const std::string& doc_id = {});

double completeness_gap(const Params& params, const TokenSeq& seq, const IGConfig& cfg);

struct AttributionRow {
    double sum = 0.0;
    double mean_score = 0.0;
    std::size_t n = 0;
};

struct AttributionTable {
    std::map<std::string, AttributionRow> rows;

    /// Adds one occurrence; the mean is refreshed on every call.
    void add(const std::string& token, double score);
};

struct DocumentAttribution {
    std::string doc_id;
    Gender gold = Gender::Male;
    Prediction prediction;
    std::vector<TokenAttribution> tokens;
    double completeness_gap = 0.0;

    nlohmann::json to_json() const;
    static DocumentAttribution from_json(const nlohmann::json& j);
};

/// Attributes every document (in parallel) and averages scores per token. PAD
/// never appears; the other specials are kept. Sums run in document and
/// position order so the result does not depend on thread scheduling.
AttributionTable aggregate_token_attributions(const Params& params, const Vocab& vocab,
                                              const std::vector<Document>& docs, const IGConfig& cfg, std::size_t max_len,
                                              std::vector<DocumentAttribution>* per_document = nullptr,
                                              std::size_t threads = 0);

struct PolarizedRow {
    std::string token;
    double mean_score = 0.0;
    std::size_t n = 0;
};

struct PolarizedLists {
    std::vector<PolarizedRow> masculine;
    std::vector<PolarizedRow> feminine;
    bool truncated = false;   // k exceeded the table size
    bool degenerate = false;  // every mean is zero
};

PolarizedLists top_polarized(const AttributionTable& table, std::size_t k = 20);

/// Two-column layout: masculine token, score, n | feminine token, score, n.
std::string format_polarized(const PolarizedLists& lists);

/// CSV with header token,mean_score,n and RFC 4180 quoting.
void write_table_csv(const AttributionTable& table, const std::filesystem::path& path);
AttributionTable read_table_csv(const std::filesystem::path& path);

void write_attributions_jsonl(const std::vector<DocumentAttribution>& docs, const std::filesystem::path& path);
std::vector<DocumentAttribution> read_attributions_jsonl(const std::filesystem::path& path);

}  // namespace comedia
