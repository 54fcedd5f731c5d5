// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsandbox/api.hpp"
#include "vsandbox/dmp.hpp"
#include "vsandbox/error.hpp"
#include "vsandbox/event_log.hpp"
#include "vsandbox/lexicon.hpp"
#include "vsandbox/metrics.hpp"
#include "vsandbox/planner.hpp"
#include "vsandbox/resolver.hpp"
#include "vsandbox/teaching.hpp"
#include "vsandbox/workspace.hpp"

namespace vsandbox {

// ---- operator inputs ------------------------------------------------------

struct UtteranceInput {
    std::string text;
    bool operator==(const UtteranceInput&) const = default;
};
struct ConfirmInput {
    bool accept = true;
    bool operator==(const ConfirmInput&) const = default;
};
struct CancelInput {
    bool operator==(const CancelInput&) const = default;
};
/// Click in the overhead view. With `name` set (and the session idle) it
/// re-grounds an existing object literal instead of answering a prompt.
struct KeypointInput {
    PixelPoint px;
    std::string name;
    bool operator==(const KeypointInput&) const = default;
};
struct PoseInput {
    Pose pose;
    bool operator==(const PoseInput&) const = default;
};
struct DecompositionInput {
    std::string text;
    std::vector<BindingAnnotation> annotations;
    bool operator==(const DecompositionInput&) const = default;
};
struct DemoBeginInput {
    bool operator==(const DemoBeginInput&) const = default;
};
struct DemoAppendInput {
    std::vector<dmp::Waypoint> poses;
    bool operator==(const DemoAppendInput&) const = default;
};
struct DemoEndInput {
    bool operator==(const DemoEndInput&) const = default;
};
/// Scenario marker (one gift bag): restocks the scene, starts a metrics segment.
struct SegmentInput {
    std::string label;
    bool operator==(const SegmentInput&) const = default;
};
/// Arms an interrupt before call `at_step` of the next execution.
struct InterruptInput {
    std::size_t at_step = 0;
    bool operator==(const InterruptInput&) const = default;
};

using SessionInput = std::variant<UtteranceInput, ConfirmInput, CancelInput, KeypointInput, PoseInput,
                                  DecompositionInput, DemoBeginInput, DemoAppendInput, DemoEndInput, SegmentInput,
                                  InterruptInput>;

/// "utterance", "confirm", "cancel", "keypoint", "pose", "decomposition",
/// "demo_begin", "demo_append", "demo_end", "segment", "interrupt".
std::string input_type(const SessionInput& input);
nlohmann::json input_to_json(const SessionInput& input);
/// Throws MalformedDocument.
SessionInput input_from_json(const nlohmann::json& j);

// ---- configuration --------------------------------------------------------

struct ErrorInjection {
    double model_p_err = 0.0;  // names grounded by the perception model
    double click_p_err = 0.0;  // names grounded by an operator click
    std::map<std::string, double> per_name;  // overrides model_p_err
    bool operator==(const ErrorInjection&) const = default;
};

struct InitialGrounding {
    std::string name;
    std::string object_id;
    GroundingSource source = GroundingSource::model;
    bool operator==(const InitialGrounding&) const = default;
};

struct SessionConfig {
    std::string scenario_kind = "gift_bag";  // selects seed API and lexicon
    std::string backend = "det";              // det | llm
    std::uint64_t seed = 0;
    bool auto_confirm = false;
    std::int64_t ms_per_word = 400;
    std::int64_t gripper_ms = 500;
    std::int64_t dmp_default_frames = 30;
    double keypoint_radius_px = 20.0;
    std::int64_t demo_min_interval_ms = 20;  // 50 Hz pose stream
    Scene scene;
    WorkspaceConfig workspace;
    std::optional<Pose> effector_start;  // default: hovering over HOME
    std::vector<InitialGrounding> groundings;
    ErrorInjection errors;
    std::optional<nlohmann::json> api;  // snapshot; default: seed API of scenario_kind
    Lexicon lexicon;                    // merged over the scenario default

    bool operator==(const SessionConfig&) const = default;
};

nlohmann::json config_to_json(const SessionConfig& config);
SessionConfig config_from_json(const nlohmann::json& j);

// ---- state ----------------------------------------------------------------

enum class Mode { Idle, AwaitingConfirmation, Teaching, Executing };
enum class TeachKind { argument, function, dmp };
std::string mode_name(Mode mode);
std::string teach_kind_name(TeachKind kind);

struct AwaitingContext {
    Utterance utterance;
    PlanAst plan;
    ResolvedProgram program;
    std::vector<dmp::Trajectory> preview;
    std::int64_t since_ms = 0;
    bool operator==(const AwaitingContext&) const = default;
};

struct TeachContext {
    std::string teach_id;
    TeachKind kind = TeachKind::argument;
    Utterance utterance;  // the command being taught; re-planned afterwards
    std::optional<ArgumentTeachRequest> argument;
    std::string grounding_name;  // set when an existing literal lacks a grounding
    std::string surface_verb;
    std::vector<dmp::Waypoint> demo;
    bool operator==(const TeachContext&) const = default;
};

struct PendingTeach {
    std::string teach_id;
    ApiDelta delta;
    bool operator==(const PendingTeach&) const = default;
};

struct ArmedInterrupt {
    std::size_t at_step = 0;
    bool live = false;
    bool operator==(const ArmedInterrupt&) const = default;
};

struct SessionState {
    ApiSpec api;
    InteractionHistory history;
    Mode mode = Mode::Idle;
    std::optional<TeachKind> mode_kind;  // set while mode == Teaching
    std::optional<AwaitingContext> awaiting;
    std::optional<TeachContext> teaching;
    std::vector<PendingTeach> pending;
    Workspace workspace;
    std::int64_t clock_ms = 0;
    std::int64_t mode_since_ms = 0;
    std::uint64_t utterance_counter = 0;
    std::uint64_t teach_counter = 0;
    std::size_t segment = 0;
    std::optional<ArmedInterrupt> interrupt;
    std::string prompt;
    SessionMetrics metrics;  // running accumulators

    bool operator==(const SessionState&) const = default;
};

nlohmann::json state_summary(const SessionState& state);

// ---- session --------------------------------------------------------------

struct SubmitResult {
    bool accepted = true;
    std::string reason;  // why an input was rejected
    std::string error;   // error code when an accepted input could not be used
    std::uint64_t first_seq = 0;
    std::uint64_t last_seq = 0;
};

using BackendFactory = std::function<std::shared_ptr<PlannerBackend>(const SessionConfig&)>;

/// Deterministic backend over the scenario lexicon; throws BackendUnavailable
/// for any other backend name.
std::shared_ptr<PlannerBackend> make_default_backend(const SessionConfig& config);

/// One operator's interaction loop. Single-threaded apart from
/// request_interrupt(), which may be called from any thread.
class Session {
public:
    explicit Session(SessionConfig config, std::shared_ptr<PlannerBackend> backend = nullptr);

    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    /// Applies one input at absolute time t_ms (clamped to the session
    /// clock). Inputs that do not fit the current mode are logged as
    /// "rejected" and leave the state unchanged.
    SubmitResult submit(const SessionInput& input, std::int64_t t_ms);
    SubmitResult submit_after(const SessionInput& input, std::int64_t after_ms);

    /// Stops the running program before its next call.
    void request_interrupt();

    const SessionState& state() const { return state_; }
    const SessionConfig& config() const { return config_; }
    const std::vector<LogRecord>& log() const { return log_.records(); }
    const SessionMetrics& metrics() const { return state_.metrics; }
    /// Plan, trajectories (and demos for DMP calls), scene, and effector.
    nlohmann::json preview_payload() const;

    void persist(std::ostream& out) const;
    /// Replays a persisted log. Throws ReplayDivergence when regenerated
    /// records differ (e.g. another seed with error injection on), CorruptLog
    /// on malformed logs.
    static std::unique_ptr<Session> resume(const std::vector<LogRecord>& log, std::optional<std::uint64_t> seed = {},
                                           const BackendFactory& backends = make_default_backend);

private:
    struct Rejection {
        std::string reason;
    };

    void emit(std::string kind, nlohmann::json payload);
    void set_mode(Mode mode, std::optional<TeachKind> kind = std::nullopt);
    ApiSpec tentative_api() const;
    ParseOutcome plan_for(const Utterance& u);

    std::optional<Rejection> check(const SessionInput& input) const;
    void apply(const SessionInput& input);

    void on_utterance(const UtteranceInput& in);
    void on_confirm(bool accept);
    void on_cancel();
    void on_keypoint(const KeypointInput& in);
    void on_pose(const PoseInput& in);
    void on_decomposition(const DecompositionInput& in);
    void on_demo_begin();
    void on_demo_append(const DemoAppendInput& in);
    void on_demo_end();
    void on_segment(const SegmentInput& in);
    void on_interrupt(const InterruptInput& in);

    void process_outcome(const Utterance& u, const ParseOutcome& outcome);
    void begin_teaching(TeachKind kind, const Utterance& u, std::string target, nlohmann::json detail);
    void add_pending(ApiDelta delta, const std::string& kind);
    void replan();
    void execute();
    void commit_pending();
    void rollback_pending(const std::string& reason);
    void message(std::string text);
    void fail_input(ErrorCode code, const std::string& text);

    SessionConfig config_;
    std::shared_ptr<PlannerBackend> backend_;
    SessionState state_;
    EventLog log_;
    std::string last_error_;
    std::atomic<bool> interrupt_requested_{false};
};

}  // namespace vsandbox
