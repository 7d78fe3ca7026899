#include "comedia/attribution.hpp"

#include "comedia/error.hpp"
#include "comedia/fsutil.hpp"

#include "csv.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

namespace comedia {
namespace {

void check_shape(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) throw Error(ErrorKind::InvalidArgument, "input and baseline shapes differ");
}

std::string format_double(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

}  // namespace

std::string_view to_string(Baseline b) { return b == Baseline::AllPad ? "all-pad" : "zero"; }

std::optional<Baseline> parse_baseline(std::string_view text) {
    if (text == "all-pad" || text == "pad") return Baseline::AllPad;
    if (text == "zero") return Baseline::ZeroEmbedding;
    return std::nullopt;
}

void IGConfig::validate() const {
    if (steps == 0) throw Error(ErrorKind::InvalidArgument, "ig.steps must be >= 1");
}

double ModelScore::value(const Matrix& x) const {
    std::vector<double> pooled(x.cols, 0.0);
    for (std::size_t r = 0; r < x.rows; ++r)
        for (std::size_t c = 0; c < x.cols; ++c) pooled[c] += x(r, c);
    for (double& v : pooled) v /= static_cast<double>(x.rows);
    const auto fwd = forward_pooled(params_, pooled);
    return fwd.logits[0] - fwd.logits[1];
}

Matrix ModelScore::gradient(const Matrix& x) const {
    const std::size_t d = params_.w1.rows;
    const std::size_t h = params_.w1.cols;
    std::vector<double> pooled(x.cols, 0.0);
    for (std::size_t r = 0; r < x.rows; ++r)
        for (std::size_t c = 0; c < x.cols; ++c) pooled[c] += x(r, c);
    const double inv = 1.0 / static_cast<double>(x.rows);
    for (double& v : pooled) v *= inv;
    const auto fwd = forward_pooled(params_, pooled);
    std::vector<double> dz(h);
    for (std::size_t j = 0; j < h; ++j)
        dz[j] = (params_.w2(j, 0) - params_.w2(j, 1)) * (1.0 - fwd.hidden[j] * fwd.hidden[j]);
    std::vector<double> dpooled(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        const auto row = params_.w1.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < h; ++j) acc += row[j] * dz[j];
        dpooled[i] = acc * inv;
    }
    Matrix g(x.rows, x.cols);
    for (std::size_t r = 0; r < x.rows; ++r) std::copy(dpooled.begin(), dpooled.end(), g.row(r).begin());
    return g;
}

double LinearScore::value(const Matrix& x) const {
    check_shape(x, weights_);
    double s = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) s += weights_.data[i] * x.data[i];
    return s;
}

Matrix LinearScore::gradient(const Matrix& x) const {
    check_shape(x, weights_);
    return weights_;
}

Matrix integrated_gradients(const Differentiable& f, const Matrix& input, const Matrix& baseline, std::size_t steps) {
    check_shape(input, baseline);
    if (steps == 0) throw Error(ErrorKind::InvalidArgument, "ig.steps must be >= 1");
    Matrix delta = input;
    for (std::size_t i = 0; i < delta.data.size(); ++i) delta.data[i] -= baseline.data[i];
    Matrix sum(input.rows, input.cols);
    Matrix point(input.rows, input.cols);
    for (std::size_t k = 1; k <= steps; ++k) {
        const double alpha = static_cast<double>(k) / static_cast<double>(steps);
        for (std::size_t i = 0; i < point.data.size(); ++i) point.data[i] = baseline.data[i] + alpha * delta.data[i];
        const Matrix g = f.gradient(point);
        for (std::size_t i = 0; i < sum.data.size(); ++i) sum.data[i] += g.data[i];
    }
    Matrix ig(input.rows, input.cols);
    const double inv = 1.0 / static_cast<double>(steps);
    for (std::size_t i = 0; i < ig.data.size(); ++i) ig.data[i] = delta.data[i] * (sum.data[i] * inv);
    return ig;
}

double completeness_gap(const Differentiable& f, const Matrix& input, const Matrix& baseline, const Matrix& ig) {
    double total = 0.0;
    for (const double v : ig.data) total += v;
    return std::abs(total - (f.value(input) - f.value(baseline)));
}

Matrix embed(const Params& params, const TokenSeq& seq) {
    mean_pool(params, seq);  // validates ids and attention_len
    Matrix x(seq.attention_len, params.embeddings.cols);
    for (std::size_t t = 0; t < seq.attention_len; ++t) {
        const auto row = params.embeddings.row(static_cast<std::size_t>(seq.ids[t]));
        std::copy(row.begin(), row.end(), x.row(t).begin());
    }
    return x;
}

Matrix baseline_for(const Params& params, const TokenSeq& seq, Baseline baseline) {
    Matrix x(seq.attention_len, params.embeddings.cols);
    if (baseline == Baseline::AllPad) {
        const auto pad = params.embeddings.row(static_cast<std::size_t>(kPadId));
        for (std::size_t t = 0; t < x.rows; ++t) std::copy(pad.begin(), pad.end(), x.row(t).begin());
    }
    return x;
}

std::vector<TokenAttribution> integrated_gradients(const Params& params, const TokenSeq& seq, const IGConfig& cfg,
                                                   const Vocab* vocab, const std::string& doc_id) {
    cfg.validate();
    const ModelScore f(params);
    const Matrix x = embed(params, seq);
    const Matrix ig = integrated_gradients(f, x, baseline_for(params, seq, cfg.baseline), cfg.steps);
    std::vector<TokenAttribution> out;
    out.reserve(seq.attention_len);
    for (std::size_t t = 0; t < seq.attention_len; ++t) {
        double score = 0.0;
        for (const double v : ig.row(t)) score += v;
        const int id = seq.ids[t];
        out.push_back({doc_id, t, vocab ? vocab->token(id) : std::to_string(id), score});
    }
    return out;
}

double completeness_gap(const Params& params, const TokenSeq& seq, const IGConfig& cfg) {
    cfg.validate();
    const ModelScore f(params);
    const Matrix x = embed(params, seq);
    const Matrix base = baseline_for(params, seq, cfg.baseline);
    return completeness_gap(f, x, base, integrated_gradients(f, x, base, cfg.steps));
}

void AttributionTable::add(const std::string& token, double score) {
    auto& row = rows[token];
    row.sum += score;
    ++row.n;
    row.mean_score = row.sum / static_cast<double>(row.n);
}

nlohmann::json DocumentAttribution::to_json() const {
    nlohmann::json tokens_json = nlohmann::json::array();
    nlohmann::json scores = nlohmann::json::array();
    for (const auto& t : tokens) {
        tokens_json.push_back(t.token);
        scores.push_back(t.score);
    }
    return {{"doc_id", doc_id},
            {"gold", std::string(comedia::to_string(gold))},
            {"label", std::string(comedia::to_string(prediction.label))},
            {"probs", prediction.probs},
            {"logits", prediction.logits},
            {"tokens", std::move(tokens_json)},
            {"scores", std::move(scores)},
            {"completeness_gap", completeness_gap}};
}

DocumentAttribution DocumentAttribution::from_json(const nlohmann::json& j) {
    DocumentAttribution d;
    d.doc_id = j.at("doc_id").get<std::string>();
    const auto gold = parse_gender(j.at("gold").get<std::string>());
    if (!gold) throw Error(ErrorKind::InvalidArgument, d.doc_id + ": unknown gold gender");
    d.gold = *gold;
    d.prediction = prediction_from_logits(j.at("logits").get<std::array<double, 2>>());
    const auto& toks = j.at("tokens");
    const auto& scores = j.at("scores");
    if (toks.size() != scores.size())
        throw Error(ErrorKind::MisalignedAttribution, d.doc_id + ": tokens and scores differ in length");
    for (std::size_t i = 0; i < toks.size(); ++i)
        d.tokens.push_back({d.doc_id, i, toks[i].get<std::string>(), scores[i].get<double>()});
    d.completeness_gap = j.value("completeness_gap", 0.0);
    return d;
}

AttributionTable aggregate_token_attributions(const Params& params, const Vocab& vocab,
                                              const std::vector<Document>& docs, const IGConfig& cfg, std::size_t max_len,
                                              std::vector<DocumentAttribution>* per_document, std::size_t threads) {
    cfg.validate();
    std::vector<std::optional<DocumentAttribution>> results(docs.size());
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(docs.size());
    auto worker = [&] {
        for (std::size_t i = next++; i < docs.size(); i = next++) {
            try {
                const auto seq = encode(docs[i].text, vocab, max_len);
                if (seq.attention_len == 0) continue;
                DocumentAttribution d;
                d.doc_id = docs[i].doc_id;
                d.gold = docs[i].gold_gender;
                d.prediction = forward(params, seq);
                const ModelScore f(params);
                const Matrix x = embed(params, seq);
                const Matrix base = baseline_for(params, seq, cfg.baseline);
                const Matrix ig = integrated_gradients(f, x, base, cfg.steps);
                d.completeness_gap = completeness_gap(f, x, base, ig);
                for (std::size_t t = 0; t < seq.attention_len; ++t) {
                    double score = 0.0;
                    for (const double v : ig.row(t)) score += v;
                    d.tokens.push_back({d.doc_id, t, vocab.token(seq.ids[t]), score});
                }
                results[i] = std::move(d);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, std::max<std::size_t>(docs.size(), 1));
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
        worker();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    AttributionTable table;
    if (per_document) per_document->clear();
    for (auto& r : results) {
        if (!r) continue;
        for (const auto& t : r->tokens) table.add(t.token, t.score);
        if (per_document) per_document->push_back(std::move(*r));
    }
    return table;
}

PolarizedLists top_polarized(const AttributionTable& table, std::size_t k) {
    if (table.rows.empty()) throw Error(ErrorKind::EmptyInput, "attribution table is empty");
    std::vector<PolarizedRow> rows;
    rows.reserve(table.rows.size());
    bool all_zero = true;
    for (const auto& [token, row] : table.rows) {
        rows.push_back({token, row.mean_score, row.n});
        if (row.mean_score != 0.0) all_zero = false;
    }
    PolarizedLists out;
    out.degenerate = all_zero;
    out.truncated = k > rows.size();
    const std::size_t n = std::min(k, rows.size());
    // std::map iteration is alphabetical, so a stable sort keeps ties in order
    auto masc = rows;
    std::stable_sort(masc.begin(), masc.end(),
                     [](const PolarizedRow& a, const PolarizedRow& b) { return a.mean_score > b.mean_score; });
    auto fem = rows;
    std::stable_sort(fem.begin(), fem.end(),
                     [](const PolarizedRow& a, const PolarizedRow& b) { return a.mean_score < b.mean_score; });
    masc.resize(n);
    fem.resize(n);
    out.masculine = std::move(masc);
    out.feminine = std::move(fem);
    return out;
}

std::string format_polarized(const PolarizedLists& lists) {
    std::ostringstream out;
    out << std::left << std::setw(20) << "masculine" << std::right << std::setw(10) << "score" << std::setw(7) << "n"
        << "   " << std::left << std::setw(20) << "feminine" << std::right << std::setw(10) << "score" << std::setw(7)
        << "n" << '\n';
    out << std::fixed << std::setprecision(4);
    const std::size_t rows = std::max(lists.masculine.size(), lists.feminine.size());
    for (std::size_t i = 0; i < rows; ++i) {
        if (i < lists.masculine.size()) {
            const auto& m = lists.masculine[i];
            out << std::left << std::setw(20) << m.token << std::right << std::setw(10) << m.mean_score
                << std::setw(7) << m.n;
        } else {
            out << std::setw(37) << "";
        }
        out << "   ";
        if (i < lists.feminine.size()) {
            const auto& f = lists.feminine[i];
            out << std::left << std::setw(20) << f.token << std::right << std::setw(10) << f.mean_score
                << std::setw(7) << f.n;
        }
        out << '\n';
    }
    if (lists.truncated) out << "(table holds fewer tokens than requested)\n";
    if (lists.degenerate) out << "(all scores are zero)\n";
    return out.str();
}

void write_table_csv(const AttributionTable& table, const std::filesystem::path& path) {
    std::string out = csv::row({"token", "mean_score", "n"});
    for (const auto& [token, row] : table.rows)
        out += csv::row({token, format_double(row.mean_score), std::to_string(row.n)});
    atomic_write(path, out);
}

AttributionTable read_table_csv(const std::filesystem::path& path) {
    const auto rows = csv::parse(read_file(path));
    if (rows.empty() || rows.front() != std::vector<std::string>{"token", "mean_score", "n"})
        throw Error(ErrorKind::InvalidArgument, path.string() + ": expected header token,mean_score,n");
    AttributionTable table;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != 3) throw Error(ErrorKind::InvalidArgument, path.string() + ": row " + std::to_string(i) + " needs 3 fields");
        AttributionRow row;
        try {
            row.mean_score = std::stod(r[1]);
            row.n = std::stoul(r[2]);
        } catch (const std::exception&) {
            throw Error(ErrorKind::InvalidArgument, path.string() + ": bad number on row " + std::to_string(i));
        }
        if (row.n == 0) throw Error(ErrorKind::InvalidArgument, path.string() + ": n must be >= 1");
        row.sum = row.mean_score * static_cast<double>(row.n);
        table.rows[r[0]] = row;
    }
    return table;
}

void write_attributions_jsonl(const std::vector<DocumentAttribution>& docs, const std::filesystem::path& path) {
    std::string out;
    for (const auto& d : docs) {
        out += d.to_json().dump();
        out.push_back('\n');
    }
    atomic_write(path, out);
}

std::vector<DocumentAttribution> read_attributions_jsonl(const std::filesystem::path& path) {
    std::vector<DocumentAttribution> out;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(DocumentAttribution::from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::InvalidArgument, path.string() + ": " + e.what());
        }
    }
    return out;
}

}  // namespace comedia
