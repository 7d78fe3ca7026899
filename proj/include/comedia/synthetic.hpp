#pragma once

#include "comedia/gender.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace comedia {

/// Generates a TEI corpus with a known gender signal.
///
/// Every character speaks `min_utterances`..`max_utterances` utterances;
/// half of them (rounded down) are filler: 2-8 words drawn from a shared
/// vocabulary. The rest are 4-30 words where each word is a cue with
/// probability `cue_rate`, drawn from the speaker's own gender vocabulary with
/// probability `cue_bias` and from the other one otherwise. The male and
/// female cue vocabularies are disjoint. Utterances also mention other
/// characters by name and use play-specific words, so masking has work to do.
///
/// The last play contains a female character who uses the male vocabulary
/// (with `crossdress_bias`) during act 1 and the female vocabulary afterwards;
/// her act-1 scenes are the flagged ones in the emitted database.
struct SyntheticOptions {
    std::uint64_t seed = 7;
    std::size_t plays = 10;
    std::size_t characters = 200;
    double female_fraction = 1.0 / 3.0;
    std::size_t min_utterances = 10;
    std::size_t max_utterances = 40;
    double cue_rate = 0.15;
    double cue_bias = 0.85;
    bool crossdresser = true;
    std::size_t crossdress_utterances = 120;
    double crossdress_bias = 0.95;
};

struct SyntheticCharacter {
    std::string play_name;
    std::string char_id;
    std::string name;
    Gender gender = Gender::Male;
    std::size_t utterances = 0;
};

struct SyntheticPlay {
    std::string play_name;
    std::string tei;
};

struct SyntheticCorpus {
    std::vector<SyntheticPlay> plays;
    std::vector<SyntheticCharacter> characters;
    /// Crossdress database CSV (empty without a cross-dresser).
    std::string crossdress_csv;
    std::string crossdresser_play;
    std::string crossdresser_id;
};

SyntheticCorpus generate_synthetic(const SyntheticOptions& options);

/// Writes <dir>/<play>.xml for each play and <dir>/crossdress.csv.
void write_synthetic(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

}  // namespace comedia
