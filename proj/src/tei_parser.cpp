#include "comedia/tei_parser.hpp"

#include "comedia/error.hpp"
#include "comedia/fsutil.hpp"
#include "comedia/text.hpp"
#include "xml_tree.hpp"

#include "json.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <regex>

namespace comedia {
namespace {

using xml::Element;

std::string strip_hash(std::string_view ref) {
    std::string out;
    for (const auto& part : split_whitespace(ref)) {
        if (!out.empty()) out.push_back(' ');
        out += part.front() == '#' ? part.substr(1) : part;
    }
    return out;
}

std::string clean(std::string_view text) { return nfc(normalize_whitespace(text)); }

Gender gender_of(const Element& e) {
    for (const char* key : {"sex", "gender"}) {
        if (const auto* v = e.attribute(key)) return gender_from_annotation(*v);
    }
    return Gender::Undefined;
}

void add_name(std::vector<std::string>& names, std::string name) {
    if (!name.empty() && std::find(names.begin(), names.end(), name) == names.end())
        names.push_back(std::move(name));
}

std::vector<Character> read_list_person(const Element& root) {
    std::vector<Character> cast;
    const auto* partic = xml::find_first(root, "particDesc");
    if (!partic) return cast;
    std::vector<const Element*> entries;
    xml::find_all(*partic, "person", entries);
    xml::find_all(*partic, "personGrp", entries);
    for (const auto* entry : entries) {
        Character c;
        if (const auto* id = entry->attribute("xml:id")) c.char_id = *id;
        if (c.char_id.empty()) continue;
        c.gender = gender_of(*entry);
        for (const auto* pn : entry->child_elements("persName")) add_name(c.display_names, clean(pn->text()));
        for (const auto* pn : entry->child_elements("name")) add_name(c.display_names, clean(pn->text()));
        if (c.display_names.empty()) add_name(c.display_names, clean(entry->text()));
        if (const auto* role = entry->attribute("role")) c.role_notes = clean(*role);
        cast.push_back(std::move(c));
    }
    return cast;
}

// castList roles: used for role notes, and as the cast itself when the
// header carries no listPerson.
void read_cast_list(const Element& root, std::vector<Character>& cast) {
    const auto* cast_list = xml::find_first(root, "castList");
    if (!cast_list) return;
    std::vector<const Element*> items;
    xml::find_all(*cast_list, "castItem", items);
    const bool have_people = !cast.empty();
    for (const auto* item : items) {
        const auto* role = item->first_child("role");
        if (!role) continue;
        std::string id;
        if (const auto* corresp = role->attribute("corresp")) id = strip_hash(*corresp);
        if (id.empty()) {
            if (const auto* xid = role->attribute("xml:id")) id = *xid;
        }
        if (id.empty()) continue;
        std::string notes;
        if (const auto* desc = item->first_child("roleDesc")) notes = clean(desc->text());
        auto it = std::find_if(cast.begin(), cast.end(), [&](const Character& c) { return c.char_id == id; });
        if (it != cast.end()) {
            if (it->role_notes.empty()) it->role_notes = notes;
            continue;
        }
        if (have_people) continue;
        Character c;
        c.char_id = id;
        c.gender = gender_of(*role);
        add_name(c.display_names, clean(role->text()));
        c.role_notes = notes;
        cast.push_back(std::move(c));
    }
}

struct ActBuilder {
    Act act;

    void add_direction(std::string text) {
        if (text.empty()) return;
        act.stage_directions.push_back({std::move(text), act.utterances.size()});
    }
};

void collect_speech_text(const Element& e, std::vector<std::string>& lines, std::vector<std::string>& trailing_directions) {
    for (const auto* child : e.child_elements()) {
        if (child->name == "speaker" || child->name == "note") continue;
        if (child->name == "stage") {
            trailing_directions.push_back(clean(child->text()));
            continue;
        }
        if (child->name == "l" || child->name == "p" || child->name == "ab") {
            // Inline stage directions inside a verse line are dropped from
            // the spoken text but still count as directions.
            std::string line;
            for (const auto& node : child->children) {
                if (const auto* s = std::get_if<std::string>(&node)) {
                    line += *s;
                } else {
                    const auto& inner = *std::get<std::unique_ptr<Element>>(node);
                    if (inner.name == "stage") {
                        trailing_directions.push_back(clean(inner.text()));
                    } else if (inner.name != "note") {
                        line += ' ';
                        line += inner.text();
                        line += ' ';
                    }
                }
            }
            auto cleaned = clean(line);
            if (!cleaned.empty()) lines.push_back(std::move(cleaned));
            continue;
        }
        collect_speech_text(*child, lines, trailing_directions);
    }
    // Bare text directly inside <sp> (rare, but seen in prose plays).
    for (const auto& node : e.children) {
        if (const auto* s = std::get_if<std::string>(&node)) {
            auto cleaned = clean(*s);
            if (!cleaned.empty() && e.name == "sp") lines.push_back(std::move(cleaned));
        }
    }
}

void walk_act(const Element& e, ActBuilder& builder) {
    for (const auto* child : e.child_elements()) {
        if (child->name == "sp") {
            std::vector<std::string> lines;
            std::vector<std::string> directions;
            collect_speech_text(*child, lines, directions);
            auto text = join(lines);
            if (!text.empty()) {
                Utterance u;
                if (const auto* who = child->attribute("who")) u.speaker_id = strip_hash(*who);
                u.text = std::move(text);
                u.act = builder.act.index;
                u.word_count = count_words(u.text);
                builder.act.utterances.push_back(std::move(u));
            }
            for (auto& d : directions) builder.add_direction(std::move(d));
        } else if (child->name == "stage") {
            builder.add_direction(clean(child->text()));
        } else if (child->name == "head" || child->name == "note") {
            continue;
        } else {
            walk_act(*child, builder);
        }
    }
}

bool is_act_div(const Element& e) {
    if (e.name != "div" && e.name != "div1") return false;
    const auto* type = e.attribute("type");
    return type && to_lower(*type) == "act";
}

std::string main_title(const Element& root) {
    const auto* stmt = xml::find_first(root, "titleStmt");
    if (!stmt) return {};
    const Element* chosen = nullptr;
    for (const auto* t : stmt->child_elements("title")) {
        const auto* type = t->attribute("type");
        if (type && *type == "main") return clean(t->text());
        if (!chosen) chosen = t;
    }
    return chosen ? clean(chosen->text()) : std::string{};
}

}  // namespace

const Character* Play::find_character(std::string_view char_id) const {
    for (const auto& c : cast) {
        if (c.char_id == char_id) return &c;
    }
    return nullptr;
}

bool Play::is_resolved(std::string_view speaker_id) const { return find_character(speaker_id) != nullptr; }

SegmentationRules SegmentationRules::defaults() {
    return {{"sale", "salen", "éntrase", "éntranse", "vase", "vanse", "salga", "salgan"}, {}};
}

SegmentationRules SegmentationRules::load(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigInvalid, path.string() + ": " + e.what());
    }
    auto rules = j.value("replace_default_cues", false) ? SegmentationRules{} : defaults();
    for (const auto& cue : j.value("cues", std::vector<std::string>{})) rules.cues.push_back(nfc(to_lower(cue)));
    rules.patterns = j.value("patterns", std::vector<std::string>{});
    for (const auto& p : rules.patterns) {
        try {
            std::regex check(p);
        } catch (const std::regex_error& e) {
            throw Error(ErrorKind::ConfigInvalid, "bad scene pattern '" + p + "': " + e.what());
        }
    }
    return rules;
}

Play parse_play(std::string_view tei_text, std::string play_name) {
    auto root = xml::parse(tei_text);
    Play play;
    play.play_name = std::move(play_name);
    if (play.play_name.empty()) {
        if (const auto* id = root->attribute("xml:id")) play.play_name = *id;
    }
    play.title = main_title(*root);
    play.cast = read_list_person(*root);
    read_cast_list(*root, play.cast);
    if (play.cast.empty()) throw Error(ErrorKind::MissingCastList, "play '" + play.play_name + "' has no cast list");

    const auto* body = xml::find_first(*root, "body");
    if (!body) body = root.get();
    std::vector<const Element*> act_divs;
    // Acts may be nested in <front>/<div type="part">; take act divs in order.
    std::function<void(const Element&)> collect = [&](const Element& e) {
        for (const auto* child : e.child_elements()) {
            if (is_act_div(*child)) {
                act_divs.push_back(child);
            } else {
                collect(*child);
            }
        }
    };
    collect(*body);
    if (act_divs.empty()) act_divs.push_back(body);

    int next_index = 1;
    for (const auto* div : act_divs) {
        ActBuilder builder;
        builder.act.index = next_index;
        walk_act(*div, builder);
        if (builder.act.utterances.empty()) continue;
        ++next_index;
        play.acts.push_back(std::move(builder.act));
    }
    for (const auto& act : play.acts) {
        for (const auto& u : act.utterances) {
            if (!play.is_resolved(u.speaker_id)) play.unresolved_speakers.insert(u.speaker_id);
        }
    }
    return play;
}

bool opens_scene(std::string_view direction, const SegmentationRules& rules) {
    const auto lowered = nfc(to_lower(direction));
    for (const auto& word : detach_punctuation(lowered)) {
        if (std::find(rules.cues.begin(), rules.cues.end(), word) != rules.cues.end()) return true;
    }
    for (const auto& pattern : rules.patterns) {
        if (std::regex_search(lowered, std::regex(pattern))) return true;
    }
    return false;
}

Play segment_scenes(Play play, const SegmentationRules& rules) {
    for (auto& act : play.acts) {
        std::vector<bool> boundary(act.utterances.size() + 1, false);
        for (const auto& d : act.stage_directions) {
            // Directions before the first or after the last utterance cannot
            // separate two non-empty scenes.
            if (d.position == 0 || d.position >= act.utterances.size()) continue;
            if (opens_scene(d.text, rules)) boundary[d.position] = true;
        }
        act.scenes.clear();
        Scene current{act.index, 1, 0, 0, {}};
        for (std::size_t i = 0; i < act.utterances.size(); ++i) {
            if (boundary[i]) {
                current.utterance_end = i;
                act.scenes.push_back(current);
                current = Scene{act.index, current.index + 1, i, i, {}};
            }
            act.utterances[i].scene = current.index;
            current.speakers.insert(act.utterances[i].speaker_id);
        }
        current.utterance_end = act.utterances.size();
        if (!act.utterances.empty()) act.scenes.push_back(current);
    }
    return play;
}

std::size_t word_count(std::string_view char_id, const Play& play) {
    if (!play.find_character(char_id)) throw Error(ErrorKind::UnknownCharacter, std::string(char_id));
    std::size_t total = 0;
    for (const auto& act : play.acts) {
        for (const auto& u : act.utterances) {
            if (u.speaker_id == char_id) total += u.word_count;
        }
    }
    return total;
}

std::size_t word_count(const Character& character, const Play& play) { return word_count(character.char_id, play); }

nlohmann::json to_json(const Play& play) {
    nlohmann::json cast = nlohmann::json::array();
    for (const auto& c : play.cast) {
        cast.push_back({{"char_id", c.char_id},
                        {"display_names", c.display_names},
                        {"gender", to_string(c.gender)},
                        {"role_notes", c.role_notes}});
    }
    nlohmann::json acts = nlohmann::json::array();
    for (const auto& act : play.acts) {
        nlohmann::json utts = nlohmann::json::array();
        for (const auto& u : act.utterances) {
            utts.push_back({{"speaker_id", u.speaker_id},
                            {"text", u.text},
                            {"act", u.act},
                            {"scene", u.scene},
                            {"word_count", u.word_count}});
        }
        nlohmann::json dirs = nlohmann::json::array();
        for (const auto& d : act.stage_directions) dirs.push_back({{"text", d.text}, {"position", d.position}});
        nlohmann::json scenes = nlohmann::json::array();
        for (const auto& s : act.scenes) {
            scenes.push_back({{"act", s.act},
                              {"index", s.index},
                              {"utterance_begin", s.utterance_begin},
                              {"utterance_end", s.utterance_end},
                              {"speakers", s.speakers}});
        }
        acts.push_back({{"index", act.index}, {"utterances", utts}, {"stage_directions", dirs}, {"scenes", scenes}});
    }
    return {{"play_name", play.play_name},
            {"title", play.title},
            {"cast", cast},
            {"acts", acts},
            {"unresolved_speakers", play.unresolved_speakers}};
}

Play play_from_json(const nlohmann::json& j) {
    Play play;
    play.play_name = j.at("play_name").get<std::string>();
    play.title = j.value("title", "");
    for (const auto& c : j.at("cast")) {
        Character ch;
        ch.char_id = c.at("char_id").get<std::string>();
        ch.display_names = c.value("display_names", std::vector<std::string>{});
        ch.gender = parse_gender(c.value("gender", "Undefined")).value_or(Gender::Undefined);
        ch.role_notes = c.value("role_notes", "");
        play.cast.push_back(std::move(ch));
    }
    for (const auto& a : j.at("acts")) {
        Act act;
        act.index = a.at("index").get<int>();
        for (const auto& u : a.at("utterances")) {
            act.utterances.push_back({u.at("speaker_id").get<std::string>(), u.at("text").get<std::string>(),
                                      u.at("act").get<int>(), u.value("scene", 0),
                                      u.at("word_count").get<std::size_t>()});
        }
        for (const auto& d : a.value("stage_directions", nlohmann::json::array()))
            act.stage_directions.push_back({d.at("text").get<std::string>(), d.at("position").get<std::size_t>()});
        for (const auto& s : a.value("scenes", nlohmann::json::array())) {
            act.scenes.push_back({s.at("act").get<int>(), s.at("index").get<int>(),
                                  s.at("utterance_begin").get<std::size_t>(), s.at("utterance_end").get<std::size_t>(),
                                  s.at("speakers").get<std::set<std::string>>()});
        }
        play.acts.push_back(std::move(act));
    }
    play.unresolved_speakers = j.value("unresolved_speakers", std::set<std::string>{});
    return play;
}

std::string read_tei_title(std::string_view tei_text) {
    auto root = xml::parse(tei_text);
    return main_title(*root);
}

std::vector<Play> load_corpus(const std::filesystem::path& dir, const SegmentationRules& rules) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension();
        if (ext == ".xml" || ext == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) { return a.stem() < b.stem(); });
    std::vector<Play> plays;
    for (const auto& f : files) {
        if (f.filename() == "manifest.json" || f.filename() == "plays.json") continue;
        if (f.extension() == ".xml") {
            plays.push_back(segment_scenes(parse_play(read_file(f), f.stem().string()), rules));
        } else {
            plays.push_back(play_from_json(nlohmann::json::parse(read_file(f))));
        }
    }
    return plays;
}

}  // namespace comedia
