// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsandbox/api.hpp"
#include "vsandbox/lexicon.hpp"
#include "vsandbox/plan.hpp"

namespace vsandbox {

struct Utterance {
    std::string id;
    std::string text;
    std::int64_t timestamp_ms = 0;  // since session start
    bool operator==(const Utterance&) const = default;
};

struct HistoryEntry {
    Utterance utterance;
    ParseOutcome outcome;
    std::string execution_result;
    bool operator==(const HistoryEntry&) const = default;
};

/// Append-only interaction history, ordered by utterance timestamp.
class InteractionHistory {
public:
    void append(HistoryEntry entry);
    /// Fills in the result of the most recent entry with this utterance id.
    void set_result(const std::string& utterance_id, std::string result);

    const std::vector<HistoryEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    bool operator==(const InteractionHistory&) const = default;

private:
    std::vector<HistoryEntry> entries_;
};

nlohmann::json history_to_json(const InteractionHistory& history);

struct PlanText {
    std::string text;
    bool operator==(const PlanText&) const = default;
};

/// The backend could not produce a plan. `verb` names the missing behavior
/// when one could be identified.
struct Refusal {
    std::string message;
    std::string verb;
    bool operator==(const Refusal&) const = default;
};

using Proposal = std::variant<PlanText, Refusal>;

enum class BackendKind { deterministic, external };

class PlannerBackend {
public:
    virtual ~PlannerBackend() = default;

    virtual BackendKind kind() const = 0;
    /// Never mutates the API. May throw BackendUnavailable.
    virtual Proposal propose(const Utterance& u, const ApiSpec& api, const InteractionHistory& history) = 0;
    /// One-line docstring for a freshly lifted function.
    virtual std::string describe_function(const std::string& verb, const std::vector<Parameter>& params,
                                          const std::vector<Invocation>& body) = 0;
    /// Abort an in-flight propose() from another thread. Optional.
    virtual void cancel() {}
};

/// Rule-based planner over a phrase lexicon. Deterministic for identical
/// (utterance text, API) pairs; ignores history.
class DeterministicBackend final : public PlannerBackend {
public:
    explicit DeterministicBackend(Lexicon lexicon = {});

    BackendKind kind() const override { return BackendKind::deterministic; }
    Proposal propose(const Utterance& u, const ApiSpec& api, const InteractionHistory& history) override;
    std::string describe_function(const std::string& verb, const std::vector<Parameter>& params,
                                  const std::vector<Invocation>& body) override;

    /// Plan text for an utterance, or a refusal. The core of propose().
    Proposal propose_text(const std::string& text, const ApiSpec& api) const;
    /// Canonical names of known literals mentioned in the text, in order.
    std::vector<std::string> referenced_literals(const std::string& text, const ApiSpec& api) const;

    const Lexicon& lexicon() const { return lexicon_; }

private:
    Lexicon lexicon_;
};

/// p = planner(u | api, history): backend proposal fed through the parser
/// and type checker. Appends nothing to the history.
ParseOutcome plan(const Utterance& u, const ApiSpec& api, const InteractionHistory& history, PlannerBackend& backend);

/// Splits an utterance into clauses on ";", "then", and "and then".
std::vector<std::string> split_clauses(const std::string& text);

}  // namespace vsandbox
