#pragma once

#include "comedia/gender.hpp"

#include "json.hpp"

#include <cstddef>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace comedia {

struct Character {
    std::string char_id;
    std::vector<std::string> display_names;
    Gender gender = Gender::Undefined;
    std::string role_notes;
};

struct Utterance {
    std::string speaker_id;
    std::string text;  // whitespace-normalized
    int act = 0;
    int scene = 0;  // 0 until segment_scenes runs
    std::size_t word_count = 0;
};

struct StageDirection {
    std::string text;
    /// Number of utterances of the act that precede this direction.
    std::size_t position = 0;
};

struct Scene {
    int act = 0;
    int index = 0;
    /// Half-open range of utterance ordinals within the act.
    std::size_t utterance_begin = 0;
    std::size_t utterance_end = 0;
    std::set<std::string> speakers;
};

struct Act {
    int index = 0;
    std::vector<Utterance> utterances;
    std::vector<StageDirection> stage_directions;
    std::vector<Scene> scenes;
};

struct Play {
    std::string play_name;
    std::string title;
    std::vector<Character> cast;
    std::vector<Act> acts;
    /// Speaker ids found on speeches that match no cast entry.
    std::set<std::string> unresolved_speakers;

    const Character* find_character(std::string_view char_id) const;
    bool is_resolved(std::string_view speaker_id) const;
};

struct SegmentationRules {
    /// Whole-word cues matched against the lowercased direction text.
    std::vector<std::string> cues;
    /// ECMAScript regexes searched in the lowercased direction text.
    std::vector<std::string> patterns;

    static SegmentationRules defaults();
    /// JSON: {"cues": [...], "patterns": [...], "replace_default_cues": bool}
    static SegmentationRules load(const std::filesystem::path& path);
};

/// `play_name` defaults to the TEI root xml:id when empty.
Play parse_play(std::string_view tei_text, std::string play_name = {});

bool opens_scene(std::string_view direction, const SegmentationRules& rules);

Play segment_scenes(Play play, const SegmentationRules& rules);

std::size_t word_count(const Character& character, const Play& play);
std::size_t word_count(std::string_view char_id, const Play& play);

nlohmann::json to_json(const Play& play);
Play play_from_json(const nlohmann::json& j);

/// Title from the TEI header without building the full play model.
std::string read_tei_title(std::string_view tei_text);

/// Parses every *.xml (TEI) or *.json (serialized play) in `dir`, sorted by
/// file stem. TEI inputs are segmented with `rules`.
std::vector<Play> load_corpus(const std::filesystem::path& dir, const SegmentationRules& rules);

}  // namespace comedia
