#include "comedia/dataset.hpp"

#include "comedia/error.hpp"
#include "comedia/fsutil.hpp"
#include "comedia/log.hpp"
#include "comedia/rng.hpp"
#include "comedia/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>
#include <unordered_set>

namespace comedia {
namespace {

using TokenPlays = std::unordered_map<std::string, std::size_t>;

// Number of distinct plays each token type occurs in.
TokenPlays play_frequencies(const std::vector<std::vector<std::vector<std::string>>>& tokens_by_play) {
    TokenPlays freq;
    for (const auto& play_tokens : tokens_by_play) {
        std::unordered_set<std::string> seen;
        for (const auto& utt : play_tokens) seen.insert(utt.begin(), utt.end());
        for (const auto& t : seen) ++freq[t];
    }
    return freq;
}

struct NameMatcher {
    // First token -> candidate token sequences, longest first.
    std::unordered_map<std::string, std::vector<std::pair<std::vector<std::string>, std::string>>> by_first;

    explicit NameMatcher(const std::set<std::string>& names) {
        for (const auto& name : names) {
            auto seq = detach_punctuation(name);
            if (seq.empty()) continue;
            by_first[seq.front()].emplace_back(std::move(seq), name);
        }
        for (auto& [first, seqs] : by_first) {
            std::stable_sort(seqs.begin(), seqs.end(),
                             [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
        }
    }

    // Length of the longest name starting at `i`, and the name matched.
    std::pair<std::size_t, const std::string*> match(const std::vector<std::string>& tokens, std::size_t i) const {
        auto it = by_first.find(tokens[i]);
        if (it == by_first.end()) return {0, nullptr};
        for (const auto& [seq, name] : it->second) {
            if (i + seq.size() > tokens.size()) continue;
            if (std::equal(seq.begin(), seq.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i)))
                return {seq.size(), &name};
        }
        return {0, nullptr};
    }
};

Partition partition_at(std::size_t index, const std::array<std::size_t, 3>& sizes) {
    if (index < sizes[0]) return Partition::Train;
    if (index < sizes[0] + sizes[1]) return Partition::Test;
    return Partition::Validation;
}

GenderStats summarize(const std::vector<std::size_t>& counts) {
    GenderStats s;
    s.count = counts.size();
    if (counts.empty()) return s;
    double total = 0;
    for (auto c : counts) total += static_cast<double>(c);
    s.mean_words = total / static_cast<double>(counts.size());
    s.min_words = *std::min_element(counts.begin(), counts.end());
    s.max_words = *std::max_element(counts.begin(), counts.end());
    return s;
}

nlohmann::json stats_json(const GenderStats& s) {
    return {{"count", s.count}, {"mean_words", s.mean_words}, {"min_words", s.min_words}, {"max_words", s.max_words}};
}

}  // namespace

std::string_view to_string(Granularity g) {
    switch (g) {
        case Granularity::Utterance: return "utterance";
        case Granularity::Scene: return "scene";
        case Granularity::Character: return "character";
    }
    return "character";
}

std::optional<Granularity> parse_granularity(std::string_view text) {
    if (text == "utterance") return Granularity::Utterance;
    if (text == "scene") return Granularity::Scene;
    if (text == "character") return Granularity::Character;
    return std::nullopt;
}

std::string_view to_string(Partition p) {
    switch (p) {
        case Partition::Train: return "train";
        case Partition::Test: return "test";
        case Partition::Validation: return "validation";
    }
    return "train";
}

std::optional<Partition> parse_partition(std::string_view text) {
    if (text == "train") return Partition::Train;
    if (text == "test") return Partition::Test;
    if (text == "validation") return Partition::Validation;
    return std::nullopt;
}

nlohmann::json to_json(const Document& d) {
    return {{"doc_id", d.doc_id},     {"play_name", d.play_name},
            {"char_id", d.char_id},   {"granularity", to_string(d.granularity)},
            {"act", d.act},           {"scene", d.scene},
            {"text", d.text},         {"gold_gender", to_string(d.gold_gender)},
            {"word_count", d.word_count}};
}

Document document_from_json(const nlohmann::json& j) {
    Document d;
    d.doc_id = j.at("doc_id").get<std::string>();
    d.play_name = j.at("play_name").get<std::string>();
    d.char_id = j.at("char_id").get<std::string>();
    const auto g = parse_granularity(j.at("granularity").get<std::string>());
    if (!g) throw Error(ErrorKind::InvalidArgument, "bad granularity in document " + d.doc_id);
    d.granularity = *g;
    d.act = j.value("act", 0);
    d.scene = j.value("scene", 0);
    d.text = j.at("text").get<std::string>();
    const auto gender = parse_gender(j.at("gold_gender").get<std::string>());
    if (!gender || *gender == Gender::Undefined)
        throw Error(ErrorKind::InvalidArgument, "document " + d.doc_id + " lacks a binary gold gender");
    d.gold_gender = *gender;
    d.word_count = j.value("word_count", std::size_t{0});
    return d;
}

void write_documents(const std::filesystem::path& path, const std::vector<Document>& docs) {
    std::string out;
    for (const auto& d : docs) {
        out += to_json(d).dump();
        out += '\n';
    }
    atomic_write(path, out);
}

std::vector<Document> read_documents(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::vector<Document> docs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        docs.push_back(document_from_json(nlohmann::json::parse(line)));
    }
    return docs;
}

nlohmann::json MaskReport::to_json() const {
    std::size_t names_total = 0;
    std::size_t mask_total = 0;
    for (const auto& [token, n] : replacement_counts) {
        (masked_names.count(token) ? names_total : mask_total) += n;
    }
    return {{"masked_names", masked_names},
            {"masked_name_count", masked_names.size()},
            {"single_play_tokens", single_play_tokens},
            {"single_play_token_count", single_play_tokens.size()},
            {"replacement_counts", replacement_counts},
            {"name_replacements", names_total},
            {"mask_replacements", mask_total}};
}

std::set<std::string> build_name_mask_list(const std::vector<Play>& corpus) {
    std::set<std::string> names;
    for (const auto& play : corpus) {
        for (const auto& c : play.cast) {
            for (const auto& name : c.display_names) {
                if (name.empty()) continue;
                for (auto form : {name, capitalize_words(name)}) {
                    if (!is_special_literal(form)) names.insert(std::move(form));
                }
            }
        }
    }
    return names;
}

std::pair<std::vector<Play>, MaskReport> mask_corpus(std::vector<Play> corpus, const std::set<std::string>& names) {
    MaskReport report;
    for (const auto& n : names) {
        if (!is_special_literal(n)) report.masked_names.insert(n);
    }
    const NameMatcher matcher(report.masked_names);

    // Phase 1: tokenize and count play frequencies on the unmasked text.
    std::vector<std::vector<std::vector<std::string>>> tokens(corpus.size());
    for (std::size_t p = 0; p < corpus.size(); ++p) {
        for (const auto& act : corpus[p].acts) {
            for (const auto& u : act.utterances) tokens[p].push_back(detach_punctuation(u.text));
        }
    }
    const auto freq = play_frequencies(tokens);

    // Phase 2: rewrite. Names take precedence over single-play masking.
    auto rewrite = [&](std::vector<std::string>& utt) {
        std::vector<std::string> out;
        out.reserve(utt.size());
        for (std::size_t i = 0; i < utt.size();) {
            if (auto [len, name] = matcher.match(utt, i); len > 0) {
                out.emplace_back(kNameToken);
                ++report.replacement_counts[*name];
                i += len;
                continue;
            }
            const auto& t = utt[i];
            if (!is_special_literal(t) && freq.at(t) == 1) {
                report.single_play_tokens.insert(t);
                ++report.replacement_counts[t];
                out.emplace_back(kMaskToken);
            } else {
                out.push_back(t);
            }
            ++i;
        }
        utt = std::move(out);
    };
    for (auto& play_tokens : tokens) {
        for (auto& utt : play_tokens) rewrite(utt);
    }

    // Phase 3: a token that appeared in several plays only as part of a
    // multi-word name elsewhere can become single-play; mask those too.
    const auto residual = play_frequencies(tokens);
    for (auto& play_tokens : tokens) {
        for (auto& utt : play_tokens) {
            for (auto& t : utt) {
                if (!is_special_literal(t) && residual.at(t) == 1) {
                    report.single_play_tokens.insert(t);
                    ++report.replacement_counts[t];
                    t = std::string(kMaskToken);
                }
            }
        }
    }

    for (std::size_t p = 0; p < corpus.size(); ++p) {
        std::size_t k = 0;
        for (auto& act : corpus[p].acts) {
            for (auto& u : act.utterances) u.text = join(tokens[p][k++]);
        }
    }
    return {std::move(corpus), std::move(report)};
}

std::vector<EligibleCharacter> filter_characters(const std::vector<Play>& corpus, std::size_t min_words) {
    std::vector<EligibleCharacter> out;
    for (const auto& play : corpus) {
        std::map<std::string, std::size_t> words;
        for (const auto& act : play.acts) {
            for (const auto& u : act.utterances) words[u.speaker_id] += u.word_count;
        }
        for (const auto& c : play.cast) {
            if (c.gender == Gender::Undefined) continue;
            const auto it = words.find(c.char_id);
            const std::size_t n = it == words.end() ? 0 : it->second;
            if (n < min_words) continue;
            out.push_back({{play.play_name, c.char_id}, c, n});
        }
    }
    return out;
}

std::vector<Document> make_documents(const std::vector<Play>& corpus, const std::vector<EligibleCharacter>& eligible,
                                     Granularity granularity) {
    std::map<CharKey, const EligibleCharacter*> lookup;
    for (const auto& e : eligible) lookup.emplace(e.key, &e);

    std::vector<Document> docs;
    for (const auto& play : corpus) {
        for (const auto& c : play.cast) {
            const auto found = lookup.find({play.play_name, c.char_id});
            if (found == lookup.end()) continue;
            const Gender gold = found->second->character.gender;
            auto base = [&] {
                Document d;
                d.play_name = play.play_name;
                d.char_id = c.char_id;
                d.granularity = granularity;
                d.gold_gender = gold;
                return d;
            };
            const std::string prefix = play.play_name + "/" + c.char_id;

            if (granularity == Granularity::Character) {
                auto d = base();
                d.doc_id = prefix;
                std::vector<std::string> parts;
                for (const auto& act : play.acts) {
                    for (const auto& u : act.utterances) {
                        if (u.speaker_id != c.char_id) continue;
                        parts.push_back(u.text);
                        d.word_count += u.word_count;
                    }
                }
                d.text = join(parts);
                if (!d.text.empty()) docs.push_back(std::move(d));
                continue;
            }

            for (const auto& act : play.acts) {
                if (granularity == Granularity::Utterance) {
                    for (std::size_t i = 0; i < act.utterances.size(); ++i) {
                        const auto& u = act.utterances[i];
                        if (u.speaker_id != c.char_id) continue;
                        auto d = base();
                        d.doc_id = prefix + "/a" + std::to_string(act.index) + "u" + std::to_string(i + 1);
                        d.act = act.index;
                        d.text = u.text;
                        d.word_count = u.word_count;
                        docs.push_back(std::move(d));
                    }
                    continue;
                }
                // Scene granularity: group by the utterances' scene index so
                // unsegmented plays (scene 0) still yield one document per act.
                std::map<int, Document> by_scene;
                std::map<int, std::vector<std::string>> parts;
                for (const auto& u : act.utterances) {
                    if (u.speaker_id != c.char_id) continue;
                    auto [it, inserted] = by_scene.try_emplace(u.scene, base());
                    if (inserted) {
                        it->second.act = act.index;
                        it->second.scene = u.scene;
                        it->second.doc_id =
                            prefix + "/a" + std::to_string(act.index) + "s" + std::to_string(u.scene);
                    }
                    it->second.word_count += u.word_count;
                    parts[u.scene].push_back(u.text);
                }
                for (auto& [scene, d] : by_scene) {
                    d.text = join(parts[scene]);
                    docs.push_back(std::move(d));
                }
            }
        }
    }
    return docs;
}

Partition SplitSpec::partition_of(const CharKey& key) const {
    const auto it = assignment.find(key);
    if (it == assignment.end()) throw Error(ErrorKind::UnknownCharacter, key.str() + " is not in the split");
    return it->second;
}

std::array<std::size_t, 3> SplitSpec::sizes() const {
    std::array<std::size_t, 3> out{};
    for (const auto& [key, p] : assignment) ++out[static_cast<std::size_t>(p)];
    return out;
}

nlohmann::json SplitSpec::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& [key, p] : assignment) {
        rows.push_back({{"play_name", key.play_name}, {"char_id", key.char_id}, {"partition", to_string(p)}});
    }
    const auto s = sizes();
    return {{"seed", seed},
            {"ratios", {ratios.train, ratios.test, ratios.validation}},
            {"sizes", {{"train", s[0]}, {"test", s[1]}, {"validation", s[2]}}},
            {"assignment", rows}};
}

SplitSpec SplitSpec::from_json(const nlohmann::json& j) {
    SplitSpec s;
    s.seed = j.at("seed").get<std::uint64_t>();
    const auto r = j.at("ratios").get<std::vector<double>>();
    if (r.size() != 3) throw Error(ErrorKind::InvalidArgument, "split ratios must have three entries");
    s.ratios = {r[0], r[1], r[2]};
    for (const auto& row : j.at("assignment")) {
        const auto p = parse_partition(row.at("partition").get<std::string>());
        if (!p) throw Error(ErrorKind::InvalidArgument, "bad partition name in split");
        s.assignment[{row.at("play_name").get<std::string>(), row.at("char_id").get<std::string>()}] = *p;
    }
    return s;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& r) {
    for (double x : {r.train, r.test, r.validation}) {
        if (!(x >= 0.0)) throw Error(ErrorKind::RatiosNotNormalized, "negative split ratio");
    }
    if (std::abs(r.train + r.test + r.validation - 1.0) > 1e-9)
        throw Error(ErrorKind::RatiosNotNormalized, "split ratios must sum to 1");
    const auto floor_of = [n](double ratio) {
        return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
    };
    const std::size_t train = std::min(n, floor_of(r.train));
    const std::size_t test = std::min(n - train, floor_of(r.test));
    return {train, test, n - train - test};
}

SplitSpec split_characters(std::vector<CharKey> chars, std::uint64_t seed, const SplitRatios& ratios,
                           const std::set<CharKey>& pinned_validation) {
    std::sort(chars.begin(), chars.end());
    chars.erase(std::unique(chars.begin(), chars.end()), chars.end());
    const auto sizes = split_sizes(chars.size(), ratios);
    Rng rng(seed);
    rng.shuffle(chars);

    // Swap each pinned key into the validation block, displacing the
    // last unpinned validation member.
    const std::size_t val_begin = sizes[0] + sizes[1];
    std::size_t slot = chars.size();
    for (std::size_t i = 0; i < val_begin; ++i) {
        if (!pinned_validation.count(chars[i])) continue;
        while (slot > val_begin && pinned_validation.count(chars[slot - 1])) --slot;
        if (slot == val_begin) {
            warn("more pinned validation characters than validation slots");
            break;
        }
        std::swap(chars[i], chars[--slot]);
    }

    SplitSpec spec;
    spec.seed = seed;
    spec.ratios = ratios;
    for (std::size_t i = 0; i < chars.size(); ++i) spec.assignment[chars[i]] = partition_at(i, sizes);
    return spec;
}

nlohmann::json CorpusStats::to_json() const {
    return {{"characters", characters}, {"male", stats_json(male)}, {"female", stats_json(female)}};
}

CorpusStats corpus_stats(const std::vector<EligibleCharacter>& eligible) {
    std::vector<std::size_t> male;
    std::vector<std::size_t> female;
    for (const auto& e : eligible) {
        (e.character.gender == Gender::Female ? female : male).push_back(e.word_count);
    }
    if (eligible.empty()) warn("corpus statistics requested for an empty corpus");
    CorpusStats s;
    s.male = summarize(male);
    s.female = summarize(female);
    s.characters = eligible.size();
    return s;
}

std::vector<Document> PreparedCorpus::documents(Granularity g, Partition p) const {
    auto all = make_documents(masked, eligible, g);
    std::vector<Document> out;
    for (auto& d : all) {
        if (split.partition_of(d.key()) == p) out.push_back(std::move(d));
    }
    return out;
}

PreparedCorpus prepare_corpus(const std::vector<Play>& corpus, const PrepareOptions& options) {
    PreparedCorpus out;
    auto [masked, report] = mask_corpus(corpus, build_name_mask_list(corpus));
    out.masked = std::move(masked);
    out.mask_report = std::move(report);
    out.eligible = filter_characters(out.masked, options.min_words);
    std::vector<CharKey> keys;
    for (const auto& e : out.eligible) keys.push_back(e.key);
    out.split = split_characters(std::move(keys), options.seed, options.ratios, options.pinned_validation);
    out.stats = corpus_stats(out.eligible);
    return out;
}

std::filesystem::path dataset_file(const std::filesystem::path& data_dir, Granularity g, Partition p) {
    return data_dir / std::string(to_string(g)) / (std::string(to_string(p)) + ".jsonl");
}

void write_prepared(const PreparedCorpus& prepared, const std::vector<Granularity>& granularities,
                    const std::filesystem::path& out_dir) {
    for (const auto g : granularities) {
        const auto all = make_documents(prepared.masked, prepared.eligible, g);
        for (const auto p : {Partition::Train, Partition::Test, Partition::Validation}) {
            std::vector<Document> part;
            for (const auto& d : all) {
                if (prepared.split.partition_of(d.key()) == p) part.push_back(d);
            }
            write_documents(dataset_file(out_dir, g, p), part);
        }
    }
    for (const auto& play : prepared.masked)
        atomic_write(out_dir / "masked" / (play.play_name + ".json"), to_json(play).dump() + "\n");
    atomic_write(out_dir / "mask_report.json", prepared.mask_report.to_json().dump(2) + "\n");
    atomic_write(out_dir / "split.json", prepared.split.to_json().dump(2) + "\n");
    atomic_write(out_dir / "stats.json", prepared.stats.to_json().dump(2) + "\n");
}

}  // namespace comedia
