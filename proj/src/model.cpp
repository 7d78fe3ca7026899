#include "comedia/model.hpp"

#include "comedia/aggregate_eval.hpp"
#include "comedia/error.hpp"
#include "comedia/fsutil.hpp"
#include "comedia/log.hpp"
#include "comedia/rng.hpp"
#include "comedia/text.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

namespace comedia {
namespace {

constexpr char kMagic[4] = {'C', 'M', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint64_t kShuffleSalt = 0x9E3779B97F4A7C15ULL;

void require_positive(std::size_t value, const char* field) {
    if (value == 0) throw Error(ErrorKind::InvalidArgument, std::string("hyper.") + field + " must be > 0");
}

// Little-endian byte writer/reader, independent of host order.
class Writer {
public:
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
    void f32(float v) { put(std::bit_cast<std::uint32_t>(v), 4); }
    void bytes(std::string_view s) { out_.append(s); }
    const std::string& str() const { return out_; }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    double f64() { return std::bit_cast<double>(get(8)); }
    float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(get(4))); }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s(data_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) throw Error(ErrorKind::TruncatedFile, "checkpoint ends early");
    }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::string_view data_;
    std::size_t pos_ = 0;
};

std::array<double, 2> softmax(const std::array<double, 2>& logits) {
    const double hi = std::max(logits[0], logits[1]);
    const double a = std::exp(logits[0] - hi);
    const double b = std::exp(logits[1] - hi);
    return {a / (a + b), b / (a + b)};
}

void check_ids(const Params& params, const TokenSeq& seq) {
    if (seq.attention_len == 0) throw Error(ErrorKind::EmptySequence, "sequence has no non-PAD tokens");
    if (seq.attention_len > seq.ids.size())
        throw Error(ErrorKind::InvalidArgument, "attention_len exceeds sequence length");
    for (std::size_t i = 0; i < seq.attention_len; ++i) {
        const int id = seq.ids[i];
        if (id < 0 || static_cast<std::size_t>(id) >= params.embeddings.rows)
            throw Error(ErrorKind::IdOutOfRange, "token id " + std::to_string(id) + " outside the embedding table");
    }
}

double macro_f1_on(const Params& params, const std::vector<Sample>& samples) {
    std::vector<LabeledPrediction> pairs;
    pairs.reserve(samples.size());
    for (const auto& s : samples) pairs.push_back({s.gold, forward(params, s.seq).label});
    return evaluate(pairs).macro.f1;
}

}  // namespace

void Hyper::validate() const {
    require_positive(embed_dim, "embed_dim");
    require_positive(hidden_dim, "hidden_dim");
    require_positive(vocab_size, "vocab_size");
    require_positive(max_len, "max_len");
    require_positive(batch_size, "batch_size");
    require_positive(max_epochs, "max_epochs");
    if (!(lr > 0.0)) throw Error(ErrorKind::InvalidArgument, "hyper.lr must be > 0");
    if (!(beta1 > 0.0 && beta1 < 1.0)) throw Error(ErrorKind::InvalidArgument, "hyper.beta1 must be in (0, 1)");
    if (!(beta2 > 0.0 && beta2 < 1.0)) throw Error(ErrorKind::InvalidArgument, "hyper.beta2 must be in (0, 1)");
    if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "hyper.eps must be > 0");
}

nlohmann::json Hyper::to_json() const {
    return {{"embed_dim", embed_dim}, {"hidden_dim", hidden_dim}, {"vocab_size", vocab_size},
            {"max_len", max_len},     {"lr", lr},                 {"beta1", beta1},
            {"beta2", beta2},         {"eps", eps},               {"batch_size", batch_size},
            {"max_epochs", max_epochs}, {"patience", patience},   {"seed", seed}};
}

Params Params::zeros(const Hyper& hyper) {
    Params p;
    p.embeddings = Matrix(hyper.vocab_size, hyper.embed_dim);
    p.w1 = Matrix(hyper.embed_dim, hyper.hidden_dim);
    p.b1.assign(hyper.hidden_dim, 0.0);
    p.w2 = Matrix(hyper.hidden_dim, 2);
    p.b2.assign(2, 0.0);
    return p;
}

void Params::for_each_array(const std::function<void(std::span<double>)>& fn) {
    fn(embeddings.data);
    fn(w1.data);
    fn(b1);
    fn(w2.data);
    fn(b2);
}

void Params::for_each_array(const std::function<void(std::span<const double>)>& fn) const {
    fn(embeddings.data);
    fn(w1.data);
    fn(b1);
    fn(w2.data);
    fn(b2);
}

std::size_t Params::parameter_count() const {
    std::size_t n = 0;
    for_each_array([&](std::span<const double> a) { n += a.size(); });
    return n;
}

std::string Params::digest() const {
    Writer w;
    for_each_array([&](std::span<const double> a) {
        w.u64(a.size());
        for (const double x : a) w.f64(x);
    });
    return sha256_hex(w.str());
}

Params init_params(const Hyper& hyper, std::uint64_t seed) {
    hyper.validate();
    Params p = Params::zeros(hyper);
    Rng rng(seed);
    for (auto* m : {&p.embeddings, &p.w1, &p.w2}) {
        for (double& x : m->data) x = rng.uniform(-0.05, 0.05);
    }
    std::fill(p.embeddings.data.begin(), p.embeddings.data.begin() + static_cast<std::ptrdiff_t>(hyper.embed_dim), 0.0);
    return p;
}

PooledForward forward_pooled(const Params& params, std::span<const double> pooled) {
    const std::size_t d = params.w1.rows;
    const std::size_t h = params.w1.cols;
    if (pooled.size() != d) throw Error(ErrorKind::InvalidArgument, "pooled vector has the wrong dimension");
    PooledForward out;
    out.hidden.assign(params.b1.begin(), params.b1.end());
    for (std::size_t i = 0; i < d; ++i) {
        const double x = pooled[i];
        if (x == 0.0) continue;
        const auto row = params.w1.row(i);
        for (std::size_t j = 0; j < h; ++j) out.hidden[j] += x * row[j];
    }
    for (double& v : out.hidden) v = std::tanh(v);
    out.logits = {params.b2[0], params.b2[1]};
    for (std::size_t j = 0; j < h; ++j) {
        out.logits[0] += out.hidden[j] * params.w2(j, 0);
        out.logits[1] += out.hidden[j] * params.w2(j, 1);
    }
    return out;
}

std::vector<double> mean_pool(const Params& params, const TokenSeq& seq) {
    check_ids(params, seq);
    const std::size_t d = params.embeddings.cols;
    std::vector<double> pooled(d, 0.0);
    for (std::size_t i = 0; i < seq.attention_len; ++i) {
        const auto row = params.embeddings.row(static_cast<std::size_t>(seq.ids[i]));
        for (std::size_t k = 0; k < d; ++k) pooled[k] += row[k];
    }
    const double inv = 1.0 / static_cast<double>(seq.attention_len);
    for (double& v : pooled) v *= inv;
    return pooled;
}

Prediction forward(const Params& params, const TokenSeq& seq) {
    return prediction_from_logits(forward_pooled(params, mean_pool(params, seq)).logits);
}

LossAndGrads loss_and_grads(const Params& params, std::span<const Sample* const> batch) {
    if (batch.empty()) throw Error(ErrorKind::EmptyInput, "loss over an empty batch");
    const std::size_t d = params.w1.rows;
    const std::size_t h = params.w1.cols;
    LossAndGrads out;
    out.grads.embeddings = Matrix(params.embeddings.rows, params.embeddings.cols);
    out.grads.w1 = Matrix(d, h);
    out.grads.b1.assign(h, 0.0);
    out.grads.w2 = Matrix(h, 2);
    out.grads.b2.assign(2, 0.0);
    auto& g = out.grads;
    const double scale = 1.0 / static_cast<double>(batch.size());

    std::vector<double> dz1(h);
    std::vector<double> dh0(d);
    for (const Sample* sample : batch) {
        const auto pooled = mean_pool(params, sample->seq);
        const auto fwd = forward_pooled(params, pooled);
        const auto probs = softmax(fwd.logits);
        const int gold = class_index(sample->gold);
        // log-softmax directly, so a saturated probability does not give inf
        const double hi = std::max(fwd.logits[0], fwd.logits[1]);
        const double lse = hi + std::log(std::exp(fwd.logits[0] - hi) + std::exp(fwd.logits[1] - hi));
        out.loss += (lse - fwd.logits[gold]) * scale;

        std::array<double, 2> dlogits = {probs[0] * scale, probs[1] * scale};
        dlogits[gold] -= scale;
        g.b2[0] += dlogits[0];
        g.b2[1] += dlogits[1];
        for (std::size_t j = 0; j < h; ++j) {
            g.w2(j, 0) += fwd.hidden[j] * dlogits[0];
            g.w2(j, 1) += fwd.hidden[j] * dlogits[1];
            const double dh1 = params.w2(j, 0) * dlogits[0] + params.w2(j, 1) * dlogits[1];
            dz1[j] = dh1 * (1.0 - fwd.hidden[j] * fwd.hidden[j]);
            g.b1[j] += dz1[j];
        }
        for (std::size_t i = 0; i < d; ++i) {
            const auto w_row = params.w1.row(i);
            auto gw_row = g.w1.row(i);
            double acc = 0.0;
            for (std::size_t j = 0; j < h; ++j) {
                gw_row[j] += pooled[i] * dz1[j];
                acc += w_row[j] * dz1[j];
            }
            dh0[i] = acc / static_cast<double>(sample->seq.attention_len);
        }
        for (std::size_t t = 0; t < sample->seq.attention_len; ++t) {
            auto row = g.embeddings.row(static_cast<std::size_t>(sample->seq.ids[t]));
            for (std::size_t i = 0; i < d; ++i) row[i] += dh0[i];
        }
    }
    auto pad_row = g.embeddings.row(static_cast<std::size_t>(kPadId));
    std::fill(pad_row.begin(), pad_row.end(), 0.0);
    return out;
}

AdamState adam_init(const Hyper& hyper) { return {Params::zeros(hyper), Params::zeros(hyper)}; }

void adam_step(Params& params, const Params& grads, AdamState& state, const Hyper& hyper, std::size_t t) {
    if (t == 0) throw Error(ErrorKind::InvalidArgument, "adam step index is 1-based");
    const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t));
    std::vector<std::span<double>> p_arrays, m_arrays, v_arrays;
    std::vector<std::span<const double>> g_arrays;
    params.for_each_array([&](std::span<double> a) { p_arrays.push_back(a); });
    state.m.for_each_array([&](std::span<double> a) { m_arrays.push_back(a); });
    state.v.for_each_array([&](std::span<double> a) { v_arrays.push_back(a); });
    grads.for_each_array([&](std::span<const double> a) { g_arrays.push_back(a); });
    for (std::size_t a = 0; a < p_arrays.size(); ++a) {
        auto p = p_arrays[a];
        auto m = m_arrays[a];
        auto v = v_arrays[a];
        auto g = g_arrays[a];
        if (p.size() != g.size() || p.size() != m.size())
            throw Error(ErrorKind::InvalidArgument, "gradient shape does not match parameters");
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
            v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            p[i] -= hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
        }
    }
}

std::vector<Sample> encode_documents(const std::vector<Document>& docs, const Vocab& vocab, std::size_t max_len) {
    std::vector<Sample> out;
    out.reserve(docs.size());
    for (const auto& doc : docs) {
        auto seq = encode(doc.text, vocab, max_len);
        if (seq.attention_len == 0) {
            warn("skipping empty document " + doc.doc_id);
            continue;
        }
        out.push_back({std::move(seq), doc.gold_gender});
    }
    return out;
}

Params round_to_float(Params params) {
    params.for_each_array([](std::span<double> a) {
        for (double& x : a) x = static_cast<double>(static_cast<float>(x));
    });
    return params;
}

Checkpoint train(const std::vector<Document>& train_docs, const std::vector<Document>& val_docs, const Vocab& vocab,
                 Hyper hyper, TrainLog* log) {
    hyper.vocab_size = vocab.size();
    hyper.validate();
    const auto train_set = encode_documents(train_docs, vocab, hyper.max_len);
    if (train_set.empty()) throw Error(ErrorKind::EmptyTrainSet, "no training documents");
    auto val_set = encode_documents(val_docs, vocab, hyper.max_len);
    const bool val_fallback = val_set.empty();
    if (val_fallback) warn("validation set is empty; early stopping uses training macro-F1");
    const auto& select_set = val_fallback ? train_set : val_set;

    Params params = init_params(hyper, hyper.seed);
    AdamState state = adam_init(hyper);
    Rng shuffle_rng(hyper.seed ^ kShuffleSalt);

    std::vector<const Sample*> order;
    order.reserve(train_set.size());
    for (const auto& s : train_set) order.push_back(&s);

    if (log) {
        log->epochs.clear();
        double total = 0.0;
        for (std::size_t b = 0; b < order.size(); b += hyper.batch_size) {
            const std::size_t n = std::min(hyper.batch_size, order.size() - b);
            total += loss_and_grads(params, std::span(order).subspan(b, n)).loss * static_cast<double>(n);
        }
        log->initial_loss = total / static_cast<double>(order.size());
    }

    Checkpoint best;
    best.vocab_digest = vocab.digest();
    best.hyper = hyper;
    bool have_best = false;
    std::size_t since_best = 0;
    std::size_t step = 0;
    for (std::size_t epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double total = 0.0;
        for (std::size_t b = 0; b < order.size(); b += hyper.batch_size) {
            const std::size_t n = std::min(hyper.batch_size, order.size() - b);
            auto lg = loss_and_grads(params, std::span(order).subspan(b, n));
            total += lg.loss * static_cast<double>(n);
            adam_step(params, lg.grads, state, hyper, ++step);
        }
        Params snapshot = round_to_float(params);
        const double f1 = macro_f1_on(snapshot, select_set);
        if (log) log->epochs.push_back({epoch, total / static_cast<double>(order.size()), f1});
        if (!have_best || f1 > best.val_macro_f1) {
            have_best = true;
            best.params = std::move(snapshot);
            best.best_epoch = epoch;
            best.val_macro_f1 = f1;
            since_best = 0;
        } else {
            ++since_best;
        }
        if (since_best >= hyper.patience) break;
    }
    return best;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto& h = ckpt.hyper;
    Writer w;
    w.bytes(std::string_view(kMagic, 4));
    w.u32(kCheckpointVersion);
    for (const std::uint64_t v : {std::uint64_t(h.embed_dim), std::uint64_t(h.hidden_dim), std::uint64_t(h.vocab_size),
                                  std::uint64_t(h.max_len), std::uint64_t(h.batch_size), std::uint64_t(h.max_epochs),
                                  std::uint64_t(h.patience), h.seed})
        w.u64(v);
    for (const double v : {h.lr, h.beta1, h.beta2, h.eps}) w.f64(v);
    w.u32(static_cast<std::uint32_t>(ckpt.vocab_digest.size()));
    w.bytes(ckpt.vocab_digest);
    w.u64(ckpt.best_epoch);
    w.f64(ckpt.val_macro_f1);
    const Params expected = Params::zeros(h);
    std::vector<std::size_t> sizes;
    expected.for_each_array([&](std::span<const double> a) { sizes.push_back(a.size()); });
    std::size_t k = 0;
    ckpt.params.for_each_array([&](std::span<const double> a) {
        if (a.size() != sizes[k++])
            throw Error(ErrorKind::InvalidArgument, "checkpoint parameters do not match the hyperparameters");
        for (const double x : a) w.f32(static_cast<float>(x));
    });
    atomic_write(path, w.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_vocab_digest) {
    const std::string data = read_file(path);
    Reader r(data);
    if (r.bytes(4) != std::string_view(kMagic, 4))
        throw Error(ErrorKind::VersionMismatch, path.string() + " is not a checkpoint file");
    const auto version = r.u32();
    if (version != kCheckpointVersion)
        throw Error(ErrorKind::VersionMismatch, "checkpoint version " + std::to_string(version) + ", expected " +
                                                    std::to_string(kCheckpointVersion));
    Checkpoint ckpt;
    auto& h = ckpt.hyper;
    h.embed_dim = r.u64();
    h.hidden_dim = r.u64();
    h.vocab_size = r.u64();
    h.max_len = r.u64();
    h.batch_size = r.u64();
    h.max_epochs = r.u64();
    h.patience = r.u64();
    h.seed = r.u64();
    h.lr = r.f64();
    h.beta1 = r.f64();
    h.beta2 = r.f64();
    h.eps = r.f64();
    h.validate();
    const auto digest_len = r.u32();
    ckpt.vocab_digest = r.bytes(digest_len);
    ckpt.best_epoch = r.u64();
    ckpt.val_macro_f1 = r.f64();
    if (!expected_vocab_digest.empty() && expected_vocab_digest != ckpt.vocab_digest)
        throw Error(ErrorKind::DigestMismatch, "checkpoint was trained with a different vocabulary");

    Params params = Params::zeros(h);
    const std::size_t floats = params.parameter_count();
    r.need(floats * 4);
    if (r.remaining() > floats * 4) throw Error(ErrorKind::InvalidArgument, "checkpoint has trailing data");
    params.for_each_array([&](std::span<double> a) {
        for (double& x : a) x = static_cast<double>(r.f32());
    });
    ckpt.params = std::move(params);
    return ckpt;
}

}  // namespace comedia
