#include "comedia/tokenizer.hpp"

#include "comedia/error.hpp"
#include "comedia/fsutil.hpp"
#include "comedia/text.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace comedia {
namespace {

constexpr std::string_view kContinuation = "##";
constexpr std::string_view kVocabHeader = "comedia-bpe-vocab";
constexpr int kVocabVersion = 1;

bool is_continuation(std::string_view piece) { return piece.substr(0, 2) == kContinuation; }

std::string_view surface(std::string_view piece) { return is_continuation(piece) ? piece.substr(2) : piece; }

std::size_t code_point_count(std::string_view piece) { return utf8_code_points(surface(piece)).size(); }

// Symbol order used for merge tie-breaks: surface text first, then word-
// initial before continuation.
bool symbol_less(std::string_view a, std::string_view b) {
    const auto sa = surface(a);
    const auto sb = surface(b);
    if (sa != sb) return sa < sb;
    return !is_continuation(a) && is_continuation(b);
}

struct Word {
    std::vector<int> symbols;
    long long freq = 0;
};

using Pair = std::pair<int, int>;

class BpeTrainer {
public:
    BpeTrainer(Vocab& vocab, std::vector<Word> words) : vocab_(vocab), words_(std::move(words)), queue_(Order{this}) {
        for (std::size_t w = 0; w < words_.size(); ++w) add_word_pairs(w, +1);
    }

    void run(std::size_t vocab_size) {
        while (vocab_.size() < vocab_size && !queue_.empty()) {
            const auto best = *queue_.begin();
            if (best.first < 2) break;
            const Pair pair = best.second;
            const std::string merged = vocab_.token(pair.first) + std::string(surface(vocab_.token(pair.second)));
            if (is_special_literal(merged)) {
                queue_.erase(queue_.begin());
                banned_.insert(pair);
                continue;
            }
            const int merged_id = vocab_.add(merged);
            vocab_.add_merge(vocab_.token(pair.first), vocab_.token(pair.second));
            apply(pair, merged_id);
        }
    }

private:
    struct Order {
        const BpeTrainer* self;
        bool operator()(const std::pair<long long, Pair>& a, const std::pair<long long, Pair>& b) const {
            if (a.first != b.first) return a.first > b.first;
            const auto& v = self->vocab_;
            const auto& al = v.token(a.second.first);
            const auto& bl = v.token(b.second.first);
            if (al != bl) return symbol_less(al, bl);
            return symbol_less(v.token(a.second.second), v.token(b.second.second));
        }
    };

    void adjust(const Pair& pair, long long delta, std::size_t word) {
        if (banned_.count(pair)) return;
        auto& count = counts_[pair];
        if (count > 0) queue_.erase({count, pair});
        count += delta;
        if (count > 0) {
            queue_.insert({count, pair});
            if (delta > 0) where_[pair].insert(word);
        } else {
            counts_.erase(pair);
        }
    }

    void add_word_pairs(std::size_t w, int sign) {
        const auto& s = words_[w].symbols;
        for (std::size_t i = 0; i + 1 < s.size(); ++i) adjust({s[i], s[i + 1]}, sign * words_[w].freq, w);
    }

    void apply(const Pair& pair, int merged_id) {
        const auto affected = where_[pair];
        where_.erase(pair);
        for (const auto w : affected) {
            auto& s = words_[w].symbols;
            bool present = false;
            for (std::size_t i = 0; i + 1 < s.size(); ++i) {
                if (s[i] == pair.first && s[i + 1] == pair.second) {
                    present = true;
                    break;
                }
            }
            if (!present) continue;
            add_word_pairs(w, -1);
            std::vector<int> next;
            next.reserve(s.size());
            for (std::size_t i = 0; i < s.size();) {
                if (i + 1 < s.size() && s[i] == pair.first && s[i + 1] == pair.second) {
                    next.push_back(merged_id);
                    i += 2;
                } else {
                    next.push_back(s[i]);
                    ++i;
                }
            }
            s = std::move(next);
            add_word_pairs(w, +1);
        }
    }

    Vocab& vocab_;
    std::vector<Word> words_;
    std::map<Pair, long long> counts_;
    std::map<Pair, std::set<std::size_t>> where_;
    std::set<Pair> banned_;
    std::set<std::pair<long long, Pair>, Order> queue_;
};

std::vector<std::string> pieces_of(const std::string& word) {
    auto cps = utf8_code_points(word);
    for (std::size_t i = 1; i < cps.size(); ++i) cps[i] = std::string(kContinuation) + cps[i];
    return cps;
}

}  // namespace

Vocab::Vocab() {
    for (auto special : {kPadToken, kUnkToken, kNameToken, kMaskToken}) add(std::string(special));
}

const std::string& Vocab::token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
        throw Error(ErrorKind::IdOutOfRange, "token id " + std::to_string(id));
    return id_to_token_[static_cast<std::size_t>(id)];
}

std::optional<int> Vocab::find(std::string_view token) const {
    const auto it = token_to_id_.find(std::string(token));
    if (it == token_to_id_.end()) return std::nullopt;
    return it->second;
}

int Vocab::add(const std::string& token) {
    if (auto existing = find(token)) return *existing;
    const int id = static_cast<int>(id_to_token_.size());
    id_to_token_.push_back(token);
    token_to_id_.emplace(token, id);
    if (!is_special_literal(token)) max_piece_len_ = std::max(max_piece_len_, code_point_count(token));
    return id;
}

std::string Vocab::vocab_text() const {
    std::ostringstream out;
    out << kVocabHeader << ' ' << kVocabVersion << ' ' << id_to_token_.size() << '\n';
    for (const auto& t : id_to_token_) out << t << '\n';
    return out.str();
}

std::string Vocab::merges_text() const {
    std::ostringstream out;
    for (const auto& [l, r] : merges_) out << l << ' ' << r << '\n';
    return out.str();
}

std::string Vocab::digest() const { return sha256_hex(vocab_text() + "\n" + merges_text()); }

void Vocab::save(const std::filesystem::path& dir) const {
    atomic_write(dir / "vocab.txt", vocab_text());
    atomic_write(dir / "merges.txt", merges_text());
}

Vocab Vocab::load(const std::filesystem::path& dir) {
    std::istringstream in(read_file(dir / "vocab.txt"));
    std::string magic;
    int version = 0;
    std::size_t size = 0;
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    hs >> magic >> version >> size;
    if (magic != kVocabHeader) throw Error(ErrorKind::InvalidArgument, "not a vocabulary file: " + dir.string());
    if (version != kVocabVersion) throw Error(ErrorKind::VersionMismatch, "vocabulary version " + std::to_string(version));
    Vocab v;
    std::string line;
    std::size_t index = 0;
    while (std::getline(in, line)) {
        if (index < kSpecialCount) {
            if (line != v.token(static_cast<int>(index)))
                throw Error(ErrorKind::InvalidArgument, "vocabulary does not start with the reserved tokens");
        } else if (v.add(line) != static_cast<int>(index)) {
            throw Error(ErrorKind::InvalidArgument, "duplicate vocabulary entry '" + line + "'");
        }
        ++index;
    }
    if (index != size) throw Error(ErrorKind::TruncatedFile, "vocabulary lists " + std::to_string(index) +
                                                                 " tokens, header says " + std::to_string(size));
    std::istringstream merges(read_file(dir / "merges.txt"));
    while (std::getline(merges, line)) {
        const auto space = line.find(' ');
        if (space == std::string::npos) throw Error(ErrorKind::InvalidArgument, "bad merge line '" + line + "'");
        v.add_merge(line.substr(0, space), line.substr(space + 1));
    }
    return v;
}

Vocab train_bpe(const std::vector<std::string>& texts, std::size_t vocab_size) {
    std::map<std::string, long long> word_freq;
    for (const auto& text : texts) {
        for (auto& w : split_whitespace(nfc(text))) {
            if (!is_special_literal(w)) ++word_freq[w];
        }
    }
    if (word_freq.empty()) throw Error(ErrorKind::EmptyCorpus, "no words to train the tokenizer on");

    std::set<std::string> base;
    for (const auto& [word, freq] : word_freq) {
        for (auto& p : pieces_of(word)) base.insert(std::move(p));
    }
    if (vocab_size < kSpecialCount + base.size()) {
        throw Error(ErrorKind::InvalidArgument, "vocab_size " + std::to_string(vocab_size) + " is below the " +
                                                    std::to_string(kSpecialCount + base.size()) +
                                                    " reserved and base symbols");
    }
    Vocab vocab;
    for (const auto& b : base) vocab.add(b);

    std::vector<Word> words;
    words.reserve(word_freq.size());
    for (const auto& [word, freq] : word_freq) {
        Word w;
        w.freq = freq;
        for (const auto& p : pieces_of(word)) w.symbols.push_back(*vocab.find(p));
        words.push_back(std::move(w));
    }
    BpeTrainer(vocab, std::move(words)).run(vocab_size);
    return vocab;
}

TokenSeq encode(std::string_view text, const Vocab& vocab, std::size_t max_len) {
    TokenSeq seq;
    seq.ids.reserve(max_len);
    for (const auto& word : split_whitespace(nfc(text))) {
        if (seq.ids.size() >= max_len) break;
        if (word == kNameToken) {
            seq.ids.push_back(kNameId);
            continue;
        }
        if (word == kMaskToken) {
            seq.ids.push_back(kMaskId);
            continue;
        }
        if (word == kUnkToken || word == kPadToken) {
            seq.ids.push_back(kUnkId);
            continue;
        }
        const auto cps = utf8_code_points(word);
        std::size_t pos = 0;
        while (pos < cps.size() && seq.ids.size() < max_len) {
            const std::size_t longest = std::min(cps.size(), pos + vocab.max_piece_code_points());
            bool matched = false;
            for (std::size_t end = longest; end > pos; --end) {
                std::string piece = pos == 0 ? std::string{} : std::string(kContinuation);
                for (std::size_t k = pos; k < end; ++k) piece += cps[k];
                if (const auto id = vocab.find(piece); id && *id >= static_cast<int>(kSpecialCount)) {
                    seq.ids.push_back(*id);
                    pos = end;
                    matched = true;
                    break;
                }
            }
            if (!matched) {
                seq.ids.push_back(kUnkId);
                ++pos;
            }
        }
    }
    seq.attention_len = seq.ids.size();
    seq.ids.resize(max_len, kPadId);
    return seq;
}

std::string decode(std::span<const int> ids, const Vocab& vocab) {
    std::string out;
    for (const int id : ids) {
        const auto& t = vocab.token(id);
        if (id == kPadId) continue;
        if (id >= static_cast<int>(kSpecialCount) && is_continuation(t) && !out.empty()) {
            out += surface(t);
            continue;
        }
        if (!out.empty()) out.push_back(' ');
        out += id >= static_cast<int>(kSpecialCount) ? std::string(surface(t)) : t;
    }
    return out;
}

}  // namespace comedia
