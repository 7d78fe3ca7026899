#include "comedia/report.hpp"

#include "comedia/error.hpp"
#include "comedia/fsutil.hpp"
#include "comedia/log.hpp"
#include "comedia/text.hpp"

#include "csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace comedia {
namespace {

struct Word {
    std::string text;
    double score = 0.0;
};

std::string rgba(double score, double max_abs) {
    const double alpha = max_abs > 0.0 ? std::min(1.0, std::abs(score) / max_abs) : 0.0;
    char buf[64];
    if (score < 0.0)
        std::snprintf(buf, sizeof buf, "rgba(255,127,14,%.3f)", alpha);
    else
        std::snprintf(buf, sizeof buf, "rgba(31,119,180,%.3f)", alpha);
    return buf;
}

std::string signed_score(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.4f", v);
    return buf;
}

std::string fixed(double v, int digits = 3) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

int parse_int(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorKind::InvalidArgument, "bad " + what + " '" + s + "' in crossdress database");
    }
}

const std::string& display_name(const Character& c) {
    return c.display_names.empty() ? c.char_id : c.display_names.front();
}

double mean_of(const std::vector<CohortMember>& members, bool accuracy) {
    if (members.empty()) return 0.0;
    double s = 0.0;
    for (const auto& m : members) s += accuracy ? (m.correct ? 1.0 : 0.0) : m.confidence;
    return s / static_cast<double>(members.size());
}

}  // namespace

std::string render_attribution_html(const Document& doc, const std::vector<TokenAttribution>& attrs) {
    // Tokens are walked against the document's code points: a vocabulary
    // piece covers its own text, UNK covers one code point, and NAME, MASK or
    // a literal special word covers the whole word.
    const auto doc_words = split_whitespace(nfc(doc.text));
    std::vector<std::vector<std::string>> doc_cps;
    for (const auto& w : doc_words) doc_cps.push_back(utf8_code_points(w));
    auto misaligned = [&](const std::string& why) {
        return Error(ErrorKind::MisalignedAttribution, doc.doc_id + ": " + why);
    };
    std::vector<Word> words;
    std::size_t wi = 0;  // current document word
    std::size_t ci = 0;  // code points of it already covered
    bool after_unk = false;
    auto close_word = [&] {
        words.back().text = doc_words[wi];
        ++wi;
        ci = 0;
    };
    for (std::size_t i = 0; i < attrs.size(); ++i) {
        const auto& a = attrs[i];
        if (!a.doc_id.empty() && a.doc_id != doc.doc_id)
            throw Error(ErrorKind::MisalignedAttribution, "attribution for " + a.doc_id + " given with " + doc.doc_id);
        if (a.position != i) throw misaligned("attribution " + std::to_string(i) + " has position " + std::to_string(a.position));
        // UNK carries no marker, so inside a word it continues that word.
        const bool continuation = a.token.starts_with("##") || (a.token == kUnkToken && ci > 0);
        if (!continuation && ci > 0) {
            if (!after_unk) throw misaligned("word " + std::to_string(words.size() - 1) + " is cut short");
            close_word();
        }
        if (wi >= doc_words.size()) throw misaligned("more attributed words than document words");
        const auto& cps = doc_cps[wi];
        if (continuation && ci == 0) throw misaligned("attribution " + std::to_string(i) + " continues no word");
        if (!continuation) words.push_back({"", 0.0});
        words.back().score += a.score;
        after_unk = false;
        if (a.token == kNameToken || a.token == kMaskToken || (a.token == kUnkToken && is_special_literal(doc_words[wi]))) {
            if (a.token != kUnkToken && doc_words[wi] != a.token)
                throw misaligned("word " + std::to_string(words.size() - 1) + " is '" + a.token + "', document has '" +
                                 doc_words[wi] + "'");
            ci = cps.size();
        } else if (a.token == kUnkToken) {
            ++ci;
            after_unk = true;
        } else {
            const auto piece = utf8_code_points(a.token.starts_with("##") ? std::string_view(a.token).substr(2) : a.token);
            for (const auto& cp : piece) {
                if (ci >= cps.size() || cps[ci] != cp)
                    throw misaligned("word " + std::to_string(words.size() - 1) + " has piece '" + a.token +
                                     "', document has '" + doc_words[wi] + "'");
                ++ci;
            }
        }
        std::string covered;
        for (std::size_t k = 0; k < ci; ++k) covered += cps[k];
        words.back().text = covered;
        if (ci == cps.size()) {
            ++wi;
            ci = 0;
        }
    }

    double max_abs = 0.0;
    for (const auto& w : words) max_abs = std::max(max_abs, std::abs(w.score));

    std::ostringstream out;
    out << "<!DOCTYPE html>\n"
        << "<html xmlns=\"http://www.w3.org/1999/xhtml\" lang=\"es\">\n"
        << "<head>\n<meta charset=\"utf-8\"/>\n<title>" << html_escape(doc.doc_id) << "</title>\n"
        << "<style>\nbody { font-family: Georgia, serif; max-width: 48em; margin: 2em auto; line-height: 1.9; }\n"
        << "span.w { padding: 0.1em 0.15em; border-radius: 0.2em; }\n"
        << ".legend span { padding: 0.1em 0.4em; }\n</style>\n</head>\n<body>\n"
        << "<h1>" << html_escape(doc.doc_id) << "</h1>\n"
        << "<p class=\"meta\">gold: " << to_string(doc.gold_gender) << "; words: " << words.size()
        << "; max |score|: " << fixed(max_abs, 4) << "</p>\n"
        << "<p class=\"legend\"><span style=\"background-color: rgba(31,119,180,1.000)\">male</span> "
        << "<span style=\"background-color: rgba(255,127,14,1.000)\">female</span></p>\n"
        << "<p class=\"text\">";
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out << ' ';
        out << "<span class=\"w\" style=\"background-color: " << rgba(words[i].score, max_abs) << "\" title=\""
            << signed_score(words[i].score) << "\">" << html_escape(words[i].text) << "</span>";
    }
    out << "</p>\n</body>\n</html>\n";
    return out.str();
}

std::string_view to_string(FlagSource s) { return s == FlagSource::StageDirection ? "StageDirection" : "Database"; }

std::vector<CrossdressRow> load_crossdress_db(const std::filesystem::path& path) {
    const auto rows = csv::parse(read_file(path));
    const std::vector<std::string> header = {"play", "character", "act", "scene", "flag", "source"};
    if (rows.empty() || rows.front() != header)
        throw Error(ErrorKind::InvalidArgument, path.string() + ": expected header play,character,act,scene,flag,source");
    std::vector<CrossdressRow> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() == 1 && r[0].empty()) continue;
        if (r.size() != header.size())
            throw Error(ErrorKind::InvalidArgument, path.string() + ": row " + std::to_string(i) + " needs 6 fields");
        CrossdressRow row;
        row.play_name = r[0];
        row.char_id = r[1];
        row.act = parse_int(r[2], "act");
        row.scene = r[3] == "*" ? 0 : parse_int(r[3], "scene");
        const auto flag = to_lower(r[4]);
        if (flag == "1" || flag == "true")
            row.crossdressing = true;
        else if (flag == "0" || flag == "false")
            row.crossdressing = false;
        else
            throw Error(ErrorKind::InvalidArgument, "bad flag '" + r[4] + "' in crossdress database");
        if (r[5] == "StageDirection")
            row.source = FlagSource::StageDirection;
        else if (r[5] == "Database")
            row.source = FlagSource::Database;
        else
            throw Error(ErrorKind::InvalidArgument, "bad source '" + r[5] + "' in crossdress database");
        out.push_back(std::move(row));
    }
    return out;
}

std::vector<CrossdressRecord> resolve_crossdress(const std::vector<CrossdressRow>& rows,
                                                 const std::vector<Play>& plays) {
    std::map<std::string, const Play*> by_name;
    for (const auto& p : plays) by_name.emplace(p.play_name, &p);

    std::vector<std::pair<std::string, std::string>> order;
    std::map<std::pair<std::string, std::string>, std::map<std::pair<int, int>, SceneFlag>> flags;
    for (const auto& row : rows) {
        const auto it = by_name.find(row.play_name);
        if (it == by_name.end()) throw Error(ErrorKind::CharacterNotFound, "play " + row.play_name + " is not loaded");
        const Play& play = *it->second;
        if (!play.find_character(row.char_id))
            throw Error(ErrorKind::CharacterNotFound, row.play_name + "/" + row.char_id);
        const auto act = std::find_if(play.acts.begin(), play.acts.end(), [&](const Act& a) { return a.index == row.act; });
        if (act == play.acts.end())
            throw Error(ErrorKind::SceneIndexMismatch, row.play_name + " has no act " + std::to_string(row.act));
        std::vector<int> scenes;
        if (row.scene == 0) {
            for (const auto& s : act->scenes) scenes.push_back(s.index);
        } else {
            const bool exists = std::any_of(act->scenes.begin(), act->scenes.end(),
                                            [&](const Scene& s) { return s.index == row.scene; });
            if (!exists)
                throw Error(ErrorKind::SceneIndexMismatch, row.play_name + " act " + std::to_string(row.act) +
                                                               " has no scene " + std::to_string(row.scene));
            scenes.push_back(row.scene);
        }
        const auto key = std::make_pair(row.play_name, row.char_id);
        if (!flags.contains(key)) order.push_back(key);
        auto& per_scene = flags[key];
        for (const int s : scenes) {
            const SceneFlag flag{row.act, s, row.crossdressing, row.source};
            auto [slot, inserted] = per_scene.try_emplace({row.act, s}, flag);
            if (inserted) continue;
            // stage directions win over the database; within one source the later row wins
            if (row.source == FlagSource::StageDirection || slot->second.source == FlagSource::Database)
                slot->second = flag;
        }
    }
    std::vector<CrossdressRecord> out;
    for (const auto& key : order) {
        CrossdressRecord rec{key.first, key.second, {}};
        for (const auto& [pos, flag] : flags[key]) rec.scenes.push_back(flag);
        out.push_back(std::move(rec));
    }
    return out;
}

nlohmann::json CrossdressReport::to_json() const {
    nlohmann::json chars = nlohmann::json::array();
    for (const auto& c : characters) {
        nlohmann::json scenes = nlohmann::json::array();
        for (const auto& s : c.scenes) {
            scenes.push_back({{"act", s.act},
                              {"scene", s.scene},
                              {"crossdressing", s.crossdressing},
                              {"source", s.source ? nlohmann::json(std::string(comedia::to_string(*s.source)))
                                                  : nlohmann::json()},
                              {"label", std::string(comedia::to_string(s.prediction.label))},
                              {"confidence", s.prediction.confidence},
                              {"p_male", s.prediction.probs[0]}});
        }
        chars.push_back({{"character", c.key.str()},
                         {"name", c.display_name},
                         {"gold", std::string(comedia::to_string(c.gold))},
                         {"label", std::string(comedia::to_string(c.decision.label))},
                         {"confidence", c.decision.confidence},
                         {"flagged_scenes", c.flagged_scenes},
                         {"agreement", c.agreement ? nlohmann::json(*c.agreement) : nlohmann::json()},
                         {"male_rate_unflagged",
                          c.male_rate_unflagged ? nlohmann::json(*c.male_rate_unflagged) : nlohmann::json()},
                         {"scenes", std::move(scenes)}});
    }
    auto members = [](const std::vector<CohortMember>& list) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& m : list)
            arr.push_back({{"character", m.key.str()}, {"name", m.display_name}, {"confidence", m.confidence},
                           {"correct", m.correct}});
        return arr;
    };
    return {{"characters", std::move(chars)},
            {"cohort",
             {{"crossdressers", members(crossdressers)},
              {"other_female", members(cohort)},
              {"mean_confidence_crossdressers", mean_confidence_crossdressers},
              {"mean_confidence_other_female", mean_confidence_cohort},
              {"accuracy_crossdressers", accuracy_crossdressers},
              {"accuracy_other_female", accuracy_cohort}}}};
}

std::string CrossdressReport::to_html() const {
    std::ostringstream out;
    out << "<!DOCTYPE html>\n<html xmlns=\"http://www.w3.org/1999/xhtml\">\n<head>\n<meta charset=\"utf-8\"/>\n"
        << "<title>Cross-dressing characters by scene</title>\n<style>\n"
        << "body { font-family: sans-serif; margin: 2em; }\ntable { border-collapse: collapse; margin-bottom: 2em; }\n"
        << "td, th { border: 1px solid #999; padding: 0.2em 0.5em; text-align: center; }\n"
        << "td.flag { background-color: #9ecae1; }\n.ok { color: #2ca02c; }\n.bad { color: #d62728; }\n"
        << "</style>\n</head>\n<body>\n<h1>Cross-dressing characters by scene</h1>\n";
    for (const auto& c : characters) {
        out << "<h2>" << html_escape(c.display_name) << " (" << html_escape(c.key.str()) << ")</h2>\n"
            << "<p>character decision: " << to_string(c.decision.label) << ", confidence "
            << fixed(c.decision.confidence) << "; flagged scenes: " << c.flagged_scenes;
        if (c.agreement) out << "; agreement " << fixed(*c.agreement);
        if (c.male_rate_unflagged) out << "; male rate elsewhere " << fixed(*c.male_rate_unflagged);
        out << "</p>\n<table>\n<tr><th>scene</th>";
        for (const auto& s : c.scenes) out << "<th>" << s.act << ':' << s.scene << "</th>";
        out << "</tr>\n<tr><th>cross-dressed</th>";
        for (const auto& s : c.scenes) out << (s.crossdressing ? "<td class=\"flag\">yes</td>" : "<td></td>");
        out << "</tr>\n<tr><th>predicted</th>";
        for (const auto& s : c.scenes) {
            // correct means Male while cross-dressed, Female otherwise
            const Gender expected = s.crossdressing ? Gender::Male : c.gold;
            out << "<td class=\"" << (s.prediction.label == expected ? "ok" : "bad") << "\">"
                << (s.prediction.label == Gender::Male ? "M" : "F") << ' ' << fixed(s.prediction.confidence, 2)
                << "</td>";
        }
        out << "</tr>\n</table>\n";
    }
    out << "<h2>Confidence by cohort</h2>\n<table>\n<tr><th>cohort</th><th>n</th><th>mean confidence</th>"
        << "<th>accuracy</th></tr>\n"
        << "<tr><td>cross-dressing</td><td>" << crossdressers.size() << "</td><td>"
        << fixed(mean_confidence_crossdressers) << "</td><td>" << fixed(accuracy_crossdressers) << "</td></tr>\n"
        << "<tr><td>other female</td><td>" << cohort.size() << "</td><td>" << fixed(mean_confidence_cohort)
        << "</td><td>" << fixed(accuracy_cohort) << "</td></tr>\n</table>\n</body>\n</html>\n";
    return out.str();
}

CrossdressReport crossdress_report(const Params& params, const Vocab& vocab, std::size_t max_len,
                                   const std::vector<Play>& masked_plays, const std::vector<CrossdressRecord>& records,
                                   std::size_t min_words) {
    std::set<std::string> play_names;
    std::set<CharKey> listed;
    for (const auto& r : records) {
        play_names.insert(r.play_name);
        listed.insert({r.play_name, r.char_id});
    }
    std::vector<Play> plays;
    for (const auto& p : masked_plays)
        if (play_names.contains(p.play_name)) plays.push_back(p);

    auto eligible = filter_characters(plays, min_words);
    std::set<CharKey> have;
    for (const auto& e : eligible) have.insert(e.key);
    for (const auto& r : records) {
        const CharKey key{r.play_name, r.char_id};
        if (have.contains(key)) continue;
        const auto play = std::find_if(plays.begin(), plays.end(), [&](const Play& p) { return p.play_name == r.play_name; });
        const Character* c = play == plays.end() ? nullptr : play->find_character(r.char_id);
        if (!c) throw Error(ErrorKind::CharacterNotFound, key.str());
        warn(key.str() + " is below the word filter; reported anyway");
        eligible.push_back({key, *c, word_count(*c, *play)});
    }

    const auto docs = make_documents(plays, eligible, Granularity::Scene);
    std::map<CharKey, std::vector<std::pair<const Document*, Prediction>>> by_char;
    for (const auto& d : docs) {
        const auto seq = encode(d.text, vocab, max_len);
        if (seq.attention_len == 0) continue;
        by_char[d.key()].emplace_back(&d, forward(params, seq));
    }

    CrossdressReport report;
    for (const auto& r : records) {
        const CharKey key{r.play_name, r.char_id};
        const auto it = by_char.find(key);
        if (it == by_char.end() || it->second.empty())
            throw Error(ErrorKind::CharacterNotFound, key.str() + " has no scene text");
        std::map<std::pair<int, int>, const SceneFlag*> flag_of;
        for (const auto& f : r.scenes) flag_of[{f.act, f.scene}] = &f;

        CharacterCrossdress c;
        c.key = key;
        const auto& ec = *std::find_if(eligible.begin(), eligible.end(), [&](const auto& e) { return e.key == key; });
        c.display_name = display_name(ec.character);
        c.gold = ec.character.gender;
        std::vector<Prediction> preds;
        std::size_t flagged_male = 0;
        std::size_t unflagged = 0;
        std::size_t unflagged_male = 0;
        for (const auto& [doc, pred] : it->second) {
            SceneReport s{doc->act, doc->scene, false, std::nullopt, pred};
            if (const auto f = flag_of.find({doc->act, doc->scene}); f != flag_of.end()) {
                s.crossdressing = f->second->crossdressing;
                s.source = f->second->source;
            }
            const bool male = pred.label == Gender::Male;
            if (s.crossdressing) {
                ++c.flagged_scenes;
                flagged_male += male;
            } else {
                ++unflagged;
                unflagged_male += male;
            }
            preds.push_back(pred);
            c.scenes.push_back(s);
        }
        for (const auto& f : r.scenes) {
            if (f.crossdressing && !std::any_of(c.scenes.begin(), c.scenes.end(), [&](const SceneReport& s) {
                    return s.act == f.act && s.scene == f.scene;
                }))
                warn(key.str() + " is flagged in " + std::to_string(f.act) + ":" + std::to_string(f.scene) +
                     " but does not speak there");
        }
        if (c.flagged_scenes) c.agreement = static_cast<double>(flagged_male) / static_cast<double>(c.flagged_scenes);
        if (unflagged) c.male_rate_unflagged = static_cast<double>(unflagged_male) / static_cast<double>(unflagged);
        c.decision = geometric_mean(preds);
        c.decision.char_key = key;
        report.crossdressers.push_back(
            {key, c.display_name, c.decision.confidence, c.decision.label == c.gold});
        report.characters.push_back(std::move(c));
    }

    for (const auto& e : eligible) {
        if (listed.contains(e.key) || e.character.gender != Gender::Female) continue;
        const auto it = by_char.find(e.key);
        if (it == by_char.end() || it->second.empty()) continue;
        std::vector<Prediction> preds;
        for (const auto& [doc, pred] : it->second) preds.push_back(pred);
        const auto d = geometric_mean(preds);
        report.cohort.push_back({e.key, display_name(e.character), d.confidence, d.label == Gender::Female});
    }
    report.mean_confidence_crossdressers = mean_of(report.crossdressers, false);
    report.mean_confidence_cohort = mean_of(report.cohort, false);
    report.accuracy_crossdressers = mean_of(report.crossdressers, true);
    report.accuracy_cohort = mean_of(report.cohort, true);
    return report;
}

}  // namespace comedia
