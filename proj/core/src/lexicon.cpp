// SPDX-License-Identifier: Apache-2.0
#include "vsandbox/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace vsandbox {

Lexicon Lexicon::gift_bag_default() {
    Lexicon lex;
    lex.verbs = {
        {"pick up", "pickup", ""},
        {"grab", "pickup", ""},
        {"go above", "goto", ""},
        {"go to", "goto", ""},
        {"move to", "goto", ""},
        {"move above", "goto", ""},
        {"drop", "release", ""},
        {"let go", "release", ""},
        {"release", "release", ""},
        {"close the gripper", "grasp", ""},
        {"go home", "go_home", ""},
        {"return home", "go_home", ""},
        {"go back home", "go_home", ""},
        {"place", "", "pickup({0}); goto({1}); release()"},
        {"put", "", "pickup({0}); goto({1}); release()"},
    };
    lex.nouns = {
        {"bag", "GIFT_BAG"},
        {"play doh", "PLAY_DOH"},
        {"playdoh", "PLAY_DOH"},
        {"car", "TOY_CAR"},
    };
    return lex;
}

Lexicon Lexicon::stop_motion_default() {
    Lexicon lex;
    lex.verbs = {
        {"go home", "go_home", ""},
        {"go to", "goto", ""},
        {"frame", "goto", ""},
        {"push in", "zoom_in", ""},
        {"zoom into", "zoom_in", ""},
        {"pan around", "pan", ""},
        {"track around", "track", ""},
    };
    lex.nouns = {
        {"the god of mischief", "LOKI"},
        {"hulk", "HULK"},
    };
    lex.adverbs = {{"slowly", 30}, {"quickly", 8}};
    return lex;
}

Lexicon Lexicon::for_scenario(const std::string& kind) {
    if (kind == "stop_motion") return stop_motion_default();
    return gift_bag_default();
}

void Lexicon::merge(const Lexicon& other) {
    for (const auto& v : other.verbs) {
        auto same = [&](const VerbAlias& x) { return x.phrase == v.phrase; };
        if (std::none_of(verbs.begin(), verbs.end(), same)) verbs.push_back(v);
    }
    for (const auto& n : other.nouns) {
        auto same = [&](const NounAlias& x) { return x.phrase == n.phrase; };
        if (std::none_of(nouns.begin(), nouns.end(), same)) nouns.push_back(n);
    }
    for (const auto& [k, v] : other.adverbs) adverbs.emplace(k, v);
}

nlohmann::json lexicon_to_json(const Lexicon& lexicon) {
    nlohmann::json verbs = nlohmann::json::array();
    for (const auto& v : lexicon.verbs) {
        nlohmann::json jv{{"phrase", v.phrase}};
        if (!v.function.empty()) jv["function"] = v.function;
        if (!v.plan_template.empty()) jv["template"] = v.plan_template;
        verbs.push_back(std::move(jv));
    }
    nlohmann::json nouns = nlohmann::json::array();
    for (const auto& n : lexicon.nouns) nouns.push_back({{"phrase", n.phrase}, {"literal", n.literal}});
    return {{"verbs", verbs}, {"nouns", nouns}, {"adverbs", lexicon.adverbs}};
}

Lexicon lexicon_from_json(const nlohmann::json& j) {
    Lexicon lex;
    for (const auto& jv : j.value("verbs", nlohmann::json::array())) {
        lex.verbs.push_back({jv.at("phrase").get<std::string>(), jv.value("function", std::string{}),
                             jv.value("template", std::string{})});
    }
    for (const auto& jn : j.value("nouns", nlohmann::json::array())) {
        lex.nouns.push_back({jn.at("phrase").get<std::string>(), jn.at("literal").get<std::string>()});
    }
    if (j.contains("adverbs")) lex.adverbs = j.at("adverbs").get<std::map<std::string, std::int64_t>>();
    return lex;
}

namespace text {

std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
    };
    for (char c : s) {
        const auto uc = static_cast<unsigned char>(c);
        if (std::isalnum(uc)) {
            cur.push_back(static_cast<char>(std::tolower(uc)));
        } else if (c == '\'') {
            continue;
        } else {
            flush();
        }
    }
    flush();
    return out;
}

std::string join(const std::vector<std::string>& words, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i > 0) out += sep;
        out += words[i];
    }
    return out;
}

std::string singular(const std::string& word) {
    if (word.size() > 4 && word.ends_with("ies")) return word.substr(0, word.size() - 3) + "y";
    if (word.size() > 3 && word.ends_with("s") && !word.ends_with("ss") && !word.ends_with("us")) {
        return word.substr(0, word.size() - 1);
    }
    return word;
}

bool is_stopword(const std::string& word) {
    static const std::set<std::string> kStop = {"the", "a", "an", "it", "this", "that", "these", "those",
                                                "some", "my", "your", "our", "its", "please", "now", "again"};
    return kStop.count(word) > 0;
}

std::string canonical_from_surface(std::string_view surface) {
    std::string out;
    for (const auto& w : tokenize(surface)) {
        if (is_stopword(w)) continue;
        if (!out.empty()) out.push_back('_');
        for (char c : w) out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    return out;
}

std::string function_name_from_verb(std::string_view verb) { return join(tokenize(verb), "_"); }

bool contains_phrase(const std::vector<std::string>& haystack, const std::vector<std::string>& needle) {
    if (needle.empty() || needle.size() > haystack.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
        bool match = true;
        for (std::size_t k = 0; k < needle.size() && match; ++k) {
            match = singular(haystack[i + k]) == singular(needle[k]);
        }
        if (match) return true;
    }
    return false;
}

}  // namespace text
}  // namespace vsandbox
