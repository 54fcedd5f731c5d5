// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace vsandbox {

/// Verb phrase mapped either to one function or to a plan template with
/// numbered slots, e.g. "pickup({0}); goto({1}); release()".
struct VerbAlias {
    std::string phrase;
    std::string function;
    std::string plan_template;
    bool operator==(const VerbAlias&) const = default;
};

struct NounAlias {
    std::string phrase;
    std::string literal;  // canonical name
    bool operator==(const NounAlias&) const = default;
};

/// Explicit phrase tables for the deterministic planner. Phrases derived
/// from function names, docstrings, and literal names are added on the fly,
/// so this only needs what those cannot supply.
struct Lexicon {
    std::vector<VerbAlias> verbs;
    std::vector<NounAlias> nouns;
    std::map<std::string, std::int64_t> adverbs;  // "slowly" -> 30 frames

    static Lexicon gift_bag_default();
    static Lexicon stop_motion_default();
    static Lexicon for_scenario(const std::string& kind);

    /// Adds entries of `other`, keeping existing ones on phrase conflicts.
    void merge(const Lexicon& other);
    bool operator==(const Lexicon&) const = default;
};

nlohmann::json lexicon_to_json(const Lexicon& lexicon);
Lexicon lexicon_from_json(const nlohmann::json& j);

namespace text {

/// Lowercase words with punctuation dropped ("Let's" -> "lets").
std::vector<std::string> tokenize(std::string_view s);
std::string join(const std::vector<std::string>& words, std::string_view sep = " ");
/// Crude plural folding: "candies" -> "candy", "cars" -> "car".
std::string singular(const std::string& word);
/// UPPER_SNAKE of content words: "the green toy car" -> "GREEN_TOY_CAR".
std::string canonical_from_surface(std::string_view surface);
/// lower_snake verb: "Zoom in" -> "zoom_in".
std::string function_name_from_verb(std::string_view verb);
bool is_stopword(const std::string& word);
/// True when `needle` occurs as a contiguous word run in `haystack`
/// (both compared after plural folding).
bool contains_phrase(const std::vector<std::string>& haystack, const std::vector<std::string>& needle);

}  // namespace text

}  // namespace vsandbox
