// SPDX-License-Identifier: Apache-2.0
#include "vsandbox/planner.hpp"

#include <algorithm>
#include <optional>
#include <set>

#include <fmt/format.h>

#include "vsandbox/error.hpp"

namespace vsandbox {

void InteractionHistory::append(HistoryEntry entry) {
    if (!entries_.empty() && entry.utterance.timestamp_ms < entries_.back().utterance.timestamp_ms) {
        throw Error(ErrorCode::InvalidArgument, "history entries must be appended in timestamp order");
    }
    entries_.push_back(std::move(entry));
}

void InteractionHistory::set_result(const std::string& utterance_id, std::string result) {
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        if (it->utterance.id == utterance_id) {
            it->execution_result = std::move(result);
            return;
        }
    }
}

nlohmann::json history_to_json(const InteractionHistory& history) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& e : history.entries()) {
        out.push_back({{"utterance_id", e.utterance.id},
                       {"text", e.utterance.text},
                       {"t", e.utterance.timestamp_ms},
                       {"outcome", outcome_to_json(e.outcome)},
                       {"result", e.execution_result}});
    }
    return out;
}

std::vector<std::string> split_clauses(const std::string& text) {
    std::vector<std::string> clauses;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find(';', start);
        if (end == std::string::npos) end = text.size();
        auto words = text::tokenize(text.substr(start, end - start));
        std::vector<std::string> cur;
        auto flush = [&] {
            if (!cur.empty()) clauses.push_back(text::join(cur));
            cur.clear();
        };
        for (std::size_t i = 0; i < words.size(); ++i) {
            if (words[i] == "then") {
                flush();
                continue;
            }
            if (words[i] == "and" && i + 1 < words.size() && words[i + 1] == "then") continue;
            cur.push_back(words[i]);
        }
        flush();
        start = end + 1;
    }
    return clauses;
}

namespace {

using Words = std::vector<std::string>;

const std::set<std::string>& leading_fillers() {
    static const std::set<std::string> k = {"now", "can",  "could", "would", "you",   "please", "ok",    "okay",
                                            "lets", "let", "us",    "i",     "want",  "need",   "to",    "robot",
                                            "hey",  "so",  "also",  "next",  "first", "finally", "and",  "well",
                                            "alright", "great", "then"};
    return k;
}

const std::set<std::string>& separators() {
    static const std::set<std::string> k = {"in",   "into", "on",     "onto",    "to",     "at",     "around",
                                            "above", "over", "with",  "near",    "from",   "by",     "for",
                                            "inside", "and", "toward", "towards", "behind", "under",  "next",
                                            "beside", "across"};
    return k;
}

const std::set<std::string>& particles() {
    static const std::set<std::string> k = {"in", "out", "up", "down", "off", "back"};
    return k;
}

const std::set<std::string>& unit_words() {
    static const std::set<std::string> k = {"frames", "frame", "seconds", "second", "steps", "step", "times", "shot"};
    return k;
}

std::optional<std::int64_t> number_word(const std::string& w) {
    static const std::vector<std::string> k = {"zero", "one", "two",   "three", "four", "five",
                                               "six",  "seven", "eight", "nine",  "ten"};
    if (!w.empty() && std::all_of(w.begin(), w.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        if (w.size() > 9) return std::nullopt;
        return std::stoll(w);
    }
    for (std::size_t i = 0; i < k.size(); ++i) {
        if (k[i] == w) return static_cast<std::int64_t>(i);
    }
    return std::nullopt;
}

struct VerbCandidate {
    Words phrase;
    std::string function;
    std::string plan_template;
    int priority = 0;  // explicit alias > function name > docstring verb
};

bool template_available(const std::string& tmpl, const ApiSpec& api) {
    std::string probe = tmpl;
    for (int slot = 0; slot < 10; ++slot) {
        const std::string key = "{" + std::to_string(slot) + "}";
        for (auto pos = probe.find(key); pos != std::string::npos; pos = probe.find(key)) {
            probe.replace(pos, key.size(), "Count.X");
        }
    }
    auto syntax = parse_invocations(probe, false);
    if (syntax.error) return false;
    return std::all_of(syntax.invocations.begin(), syntax.invocations.end(),
                       [&](const Invocation& c) { return api.find_function(c.function) != nullptr; });
}

std::size_t template_slots(const std::string& tmpl) {
    std::size_t n = 0;
    while (tmpl.find("{" + std::to_string(n) + "}") != std::string::npos) ++n;
    return n;
}

std::vector<VerbCandidate> verb_candidates(const Lexicon& lex, const ApiSpec& api) {
    std::vector<VerbCandidate> out;
    for (const auto& v : lex.verbs) {
        if (!v.plan_template.empty()) {
            if (template_available(v.plan_template, api)) out.push_back({text::tokenize(v.phrase), "", v.plan_template, 3});
        } else if (api.find_function(v.function) != nullptr) {
            out.push_back({text::tokenize(v.phrase), v.function, "", 3});
        }
    }
    std::map<std::string, std::vector<std::string>> doc_verbs;
    for (const auto& f : api.functions()) {
        out.push_back({text::tokenize(surface_from_canonical(f.name)), f.name, "", 2});
        auto doc = text::tokenize(f.docstring);
        if (!doc.empty()) doc_verbs[doc.front()].push_back(f.name);
    }
    for (const auto& [verb, fns] : doc_verbs) {
        if (fns.size() == 1) out.push_back({{verb}, fns.front(), "", 1});
    }
    return out;
}

struct NounCandidate {
    Words phrase;
    const LiteralArg* literal = nullptr;
};

// Argument segments never contain stopwords, so neither may the phrases
// they are matched against.
Words content_words(const std::string& phrase) {
    Words out;
    for (auto& w : text::tokenize(phrase)) {
        if (!text::is_stopword(w)) out.push_back(std::move(w));
    }
    return out;
}

std::vector<NounCandidate> noun_candidates(const Lexicon& lex, const ApiSpec& api) {
    std::vector<NounCandidate> out;
    for (const auto& n : lex.nouns) {
        if (const auto* lit = api.find_literal(n.literal)) out.push_back({content_words(n.phrase), lit});
    }
    for (const auto& lit : api.literals()) out.push_back({text::tokenize(surface_from_canonical(lit.canonical_name)), &lit});
    return out;
}

bool phrase_equal(const Words& a, const Words& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (text::singular(a[i]) != text::singular(b[i])) return false;
    }
    return true;
}

const LiteralArg* match_noun(const Words& segment, const std::vector<NounCandidate>& nouns) {
    for (const auto& n : nouns) {
        if (phrase_equal(segment, n.phrase)) return n.literal;
    }
    const NounCandidate* best = nullptr;
    for (const auto& n : nouns) {
        if (text::contains_phrase(segment, n.phrase) && (best == nullptr || n.phrase.size() > best->phrase.size())) {
            best = &n;
        }
    }
    return best != nullptr ? best->literal : nullptr;
}

struct ClauseArgs {
    std::vector<Words> segments;
    std::vector<std::int64_t> numbers;
};

ClauseArgs split_arguments(const Words& rest, const Lexicon& lex) {
    ClauseArgs out;
    Words cur;
    auto flush = [&] {
        if (!cur.empty()) out.segments.push_back(cur);
        cur.clear();
    };
    for (const auto& w : rest) {
        if (auto n = number_word(w)) {
            out.numbers.push_back(*n);
            continue;
        }
        if (auto it = lex.adverbs.find(w); it != lex.adverbs.end()) {
            out.numbers.push_back(it->second);
            continue;
        }
        if (separators().count(w) > 0) {
            flush();
            continue;
        }
        if (text::is_stopword(w) || unit_words().count(w) > 0) continue;
        cur.push_back(w);
    }
    flush();
    return out;
}

std::string placeholder(const Words& segment, const std::string& type) {
    return type + "." + text::canonical_from_surface(text::join(segment));
}

std::string literal_text(const Words& segment, const std::vector<NounCandidate>& nouns, const std::string& type) {
    if (const auto* lit = match_noun(segment, nouns)) return lit->type + "." + lit->canonical_name;
    return placeholder(segment, type);
}

std::string first_non_count(const ParamType& t) {
    for (const auto& a : t.alternatives) {
        if (a != kCountType) return a;
    }
    return t.alternatives.front();
}

}  // namespace

DeterministicBackend::DeterministicBackend(Lexicon lexicon) : lexicon_(std::move(lexicon)) {}

Proposal DeterministicBackend::propose(const Utterance& u, const ApiSpec& api, const InteractionHistory&) {
    return propose_text(u.text, api);
}

Proposal DeterministicBackend::propose_text(const std::string& utterance, const ApiSpec& api) const {
    const auto verbs = verb_candidates(lexicon_, api);
    const auto nouns = noun_candidates(lexicon_, api);
    std::vector<std::string> calls;
    for (const auto& clause : split_clauses(utterance)) {
        Words words = text::tokenize(clause);
        std::size_t start = 0;
        while (start < words.size() && leading_fillers().count(words[start]) > 0) {
            // "go" never reaches here; "to" only as filler ("want you to ...").
            ++start;
        }
        words.erase(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(start));
        if (words.empty()) continue;

        const VerbCandidate* verb = nullptr;
        for (const auto& v : verbs) {
            if (v.phrase.empty() || v.phrase.size() > words.size()) continue;
            if (!std::equal(v.phrase.begin(), v.phrase.end(), words.begin())) continue;
            if (verb == nullptr || v.phrase.size() > verb->phrase.size() ||
                (v.phrase.size() == verb->phrase.size() && v.priority > verb->priority)) {
                verb = &v;
            }
        }
        if (verb == nullptr) {
            std::string name = words.front();
            if (words.size() > 1 && particles().count(words[1]) > 0) name += " " + words[1];
            // An alias for a function that is not taught yet names what to teach.
            std::string target = name;
            std::size_t matched = 0;
            for (const auto& v : lexicon_.verbs) {
                const Words phrase = text::tokenize(v.phrase);
                if (v.function.empty() || phrase.empty() || phrase.size() > words.size() || phrase.size() <= matched) continue;
                if (!std::equal(phrase.begin(), phrase.end(), words.begin())) continue;
                matched = phrase.size();
                name = v.phrase;
                target = text::join(text::tokenize(v.function));
            }
            return Refusal{clarification_message(name), target};
        }

        const Words rest(words.begin() + static_cast<std::ptrdiff_t>(verb->phrase.size()), words.end());
        ClauseArgs args = split_arguments(rest, lexicon_);

        if (!verb->plan_template.empty()) {
            std::string filled = verb->plan_template;
            const std::size_t slots = template_slots(filled);
            for (std::size_t s = 0; s < slots; ++s) {
                const std::string key = "{" + std::to_string(s) + "}";
                const std::string value =
                    s < args.segments.size() ? literal_text(args.segments[s], nouns, kObjectRefType) : "";
                for (auto pos = filled.find(key); pos != std::string::npos; pos = filled.find(key)) {
                    filled.replace(pos, key.size(), value);
                }
            }
            calls.push_back(filled);
            continue;
        }

        const FunctionSpec& fn = *api.find_function(verb->function);
        std::vector<std::string> rendered;
        std::size_t next_segment = 0;
        std::size_t next_number = 0;
        for (const auto& param : fn.params) {
            const bool wants_count = param.type.accepts(kCountType);
            const bool wants_ref = first_non_count(param.type) != kCountType;
            if (wants_ref && next_segment < args.segments.size()) {
                rendered.push_back(literal_text(args.segments[next_segment++], nouns, first_non_count(param.type)));
            } else if (wants_count && next_number < args.numbers.size()) {
                rendered.push_back(std::to_string(args.numbers[next_number++]));
            } else {
                break;
            }
        }
        calls.push_back(fmt::format("{}({})", fn.name, text::join(rendered, ", ")));
    }
    if (calls.empty()) return Refusal{"I didn't catch a command; could you say that again?", ""};
    return PlanText{text::join(calls, "; ")};
}

std::vector<std::string> DeterministicBackend::referenced_literals(const std::string& utterance,
                                                                   const ApiSpec& api) const {
    const auto nouns = noun_candidates(lexicon_, api);
    std::vector<std::string> out;
    for (const auto& clause : split_clauses(utterance)) {
        auto args = split_arguments(text::tokenize(clause), lexicon_);
        for (const auto& seg : args.segments) {
            const auto* lit = match_noun(seg, nouns);
            if (lit != nullptr && std::find(out.begin(), out.end(), lit->canonical_name) == out.end()) {
                out.push_back(lit->canonical_name);
            }
        }
    }
    return out;
}

std::string DeterministicBackend::describe_function(const std::string& verb, const std::vector<Parameter>& params,
                                                    const std::vector<Invocation>&) {
    if (params.empty()) return fmt::format("Perform {}.", verb);
    std::vector<std::string> names;
    for (const auto& p : params) names.push_back(p.name);
    return fmt::format("Perform {} on {}.", verb, text::join(names, ", "));
}

ParseOutcome plan(const Utterance& u, const ApiSpec& api, const InteractionHistory& history, PlannerBackend& backend) {
    Proposal proposal = backend.propose(u, api, history);
    if (const auto* text = std::get_if<PlanText>(&proposal)) return parse_plan_text(text->text, api, u.id);
    const auto& refusal = std::get<Refusal>(proposal);
    if (!refusal.verb.empty()) return TeachFunction{refusal.verb, refusal.message};
    return Malformed{refusal.message};
}

}  // namespace vsandbox
