#pragma once

// Independent re-derivations used to check library results. Kept naive on
// purpose: these loop over everything instead of reusing library helpers.

#include "comedia/tei_parser.hpp"
#include "comedia/text.hpp"

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace oracle {

/// Word types (any non-special token) found in exactly one play.
inline std::set<std::string> single_play_types(const std::vector<comedia::Play>& plays) {
    std::map<std::string, std::set<std::string>> seen;
    for (const auto& play : plays) {
        for (const auto& act : play.acts) {
            for (const auto& u : act.utterances) {
                for (const auto& t : comedia::split_whitespace(u.text)) seen[t].insert(play.play_name);
            }
        }
    }
    std::set<std::string> out;
    for (const auto& [t, where] : seen) {
        if (where.size() == 1 && !comedia::is_special_literal(t)) out.insert(t);
    }
    return out;
}

/// Cast display names (and their capitalized forms) still present as a
/// contiguous token run in some utterance.
inline std::set<std::string> surviving_names(const std::vector<comedia::Play>& original,
                                             const std::vector<comedia::Play>& masked) {
    std::set<std::string> names;
    for (const auto& play : original) {
        for (const auto& c : play.cast) {
            for (const auto& n : c.display_names) {
                names.insert(n);
                names.insert(comedia::capitalize_words(n));
            }
        }
    }
    std::set<std::string> out;
    for (const auto& name : names) {
        const auto needle = comedia::detach_punctuation(name);
        if (needle.empty()) continue;
        for (const auto& play : masked) {
            for (const auto& act : play.acts) {
                for (const auto& u : act.utterances) {
                    const auto hay = comedia::split_whitespace(u.text);
                    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
                        bool hit = true;
                        for (std::size_t k = 0; k < needle.size() && hit; ++k) hit = hay[i + k] == needle[k];
                        if (hit) out.insert(name);
                    }
                }
            }
        }
    }
    return out;
}

/// Direct product^(1/n), no logs.
inline double gm_direct(const std::vector<double>& p) {
    double prod = 1.0;
    for (double x : p) prod *= x;
    return std::pow(prod, 1.0 / static_cast<double>(p.size()));
}

struct Counts {
    double tp = 0, fp = 0, fn = 0;
};

inline double f1_of(const Counts& c) {
    const double p = c.tp + c.fp > 0 ? c.tp / (c.tp + c.fp) : 0.0;
    const double r = c.tp + c.fn > 0 ? c.tp / (c.tp + c.fn) : 0.0;
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

}  // namespace oracle
