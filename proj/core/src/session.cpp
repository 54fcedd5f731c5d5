// SPDX-License-Identifier: Apache-2.0
#include "vsandbox/session.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "vsandbox/error.hpp"

namespace vsandbox {

// ---- inputs ---------------------------------------------------------------

std::string input_type(const SessionInput& input) {
    static const char* const names[] = {"utterance",  "confirm",    "cancel",      "keypoint", "pose",     "decomposition",
                                        "demo_begin", "demo_append", "demo_end",   "segment",  "interrupt"};
    return names[input.index()];
}

namespace {

nlohmann::json waypoint_to_json(const dmp::Waypoint& w) {
    return {{"t", w.t}, {"pose", pose_to_json(w.pose)}};
}

dmp::Waypoint waypoint_from_json(const nlohmann::json& j) {
    dmp::Waypoint w;
    w.t = j.at("t").get<double>();
    if (j.contains("pose")) {
        w.pose = pose_from_json(j["pose"]);
    } else {
        w.pose.position = Vec3(j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>());
        w.pose.orientation = Quat(j.value("qw", 1.0), j.value("qx", 0.0), j.value("qy", 0.0), j.value("qz", 0.0));
    }
    return w;
}

}  // namespace

nlohmann::json input_to_json(const SessionInput& input) {
    nlohmann::json j{{"type", input_type(input)}};
    std::visit(
        [&](const auto& in) {
            using T = std::decay_t<decltype(in)>;
            if constexpr (std::is_same_v<T, UtteranceInput>) {
                j["text"] = in.text;
            } else if constexpr (std::is_same_v<T, ConfirmInput>) {
                j["accept"] = in.accept;
            } else if constexpr (std::is_same_v<T, KeypointInput>) {
                j["keypoint"] = {in.px.u, in.px.v};
                if (!in.name.empty()) j["name"] = in.name;
            } else if constexpr (std::is_same_v<T, PoseInput>) {
                j["pose"] = pose_to_json(in.pose);
            } else if constexpr (std::is_same_v<T, DecompositionInput>) {
                j["text"] = in.text;
                if (!in.annotations.empty()) {
                    nlohmann::json ann = nlohmann::json::array();
                    for (const auto& a : in.annotations) {
                        ann.push_back({{"literal", a.literal}, {"param", a.param_name}, {"constant", a.constant}});
                    }
                    j["annotations"] = ann;
                }
            } else if constexpr (std::is_same_v<T, DemoAppendInput>) {
                nlohmann::json poses = nlohmann::json::array();
                for (const auto& w : in.poses) poses.push_back(waypoint_to_json(w));
                j["poses"] = poses;
            } else if constexpr (std::is_same_v<T, SegmentInput>) {
                j["label"] = in.label;
            } else if constexpr (std::is_same_v<T, InterruptInput>) {
                j["at_step"] = in.at_step;
            }
        },
        input);
    return j;
}

SessionInput input_from_json(const nlohmann::json& j) {
    try {
        const auto type = j.at("type").get<std::string>();
        if (type == "utterance") return UtteranceInput{j.at("text").get<std::string>()};
        if (type == "confirm") return ConfirmInput{j.value("accept", true)};
        if (type == "cancel") return CancelInput{};
        if (type == "keypoint") {
            const auto& k = j.at("keypoint");
            if (!k.is_array() || k.size() != 2) throw Error(ErrorCode::MalformedDocument, "keypoint must be [u, v]");
            return KeypointInput{{k[0].get<double>(), k[1].get<double>()}, j.value("name", std::string{})};
        }
        if (type == "pose") return PoseInput{pose_from_json(j.at("pose"))};
        if (type == "decomposition") {
            DecompositionInput in{j.at("text").get<std::string>(), {}};
            for (const auto& a : j.value("annotations", nlohmann::json::array())) {
                in.annotations.push_back(
                    {a.at("literal").get<std::string>(), a.value("param", std::string{}), a.value("constant", false)});
            }
            return in;
        }
        if (type == "demo_begin") return DemoBeginInput{};
        if (type == "demo_append") {
            DemoAppendInput in;
            for (const auto& w : j.at("poses")) in.poses.push_back(waypoint_from_json(w));
            return in;
        }
        if (type == "demo_end") return DemoEndInput{};
        if (type == "segment") return SegmentInput{j.value("label", std::string{})};
        if (type == "interrupt") return InterruptInput{j.value("at_step", std::size_t{0})};
        throw Error(ErrorCode::MalformedDocument, "unknown input type " + type);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedDocument, std::string("bad input: ") + e.what());
    }
}

// ---- configuration --------------------------------------------------------

nlohmann::json config_to_json(const SessionConfig& c) {
    nlohmann::json groundings = nlohmann::json::array();
    for (const auto& g : c.groundings) {
        groundings.push_back({{"name", g.name}, {"object", g.object_id}, {"source", grounding_source_name(g.source)}});
    }
    nlohmann::json j{{"scenario_kind", c.scenario_kind},
                     {"backend", c.backend},
                     {"seed", c.seed},
                     {"auto_confirm", c.auto_confirm},
                     {"ms_per_word", c.ms_per_word},
                     {"gripper_ms", c.gripper_ms},
                     {"dmp_default_frames", c.dmp_default_frames},
                     {"keypoint_radius_px", c.keypoint_radius_px},
                     {"demo_min_interval_ms", c.demo_min_interval_ms},
                     {"scene", scene_to_json(c.scene)},
                     {"workspace", workspace_config_to_json(c.workspace)},
                     {"groundings", groundings},
                     {"errors",
                      {{"model_p_err", c.errors.model_p_err},
                       {"click_p_err", c.errors.click_p_err},
                       {"per_name", c.errors.per_name}}},
                     {"lexicon", lexicon_to_json(c.lexicon)}};
    if (c.effector_start) j["effector_start"] = pose_to_json(*c.effector_start);
    if (c.api) j["api"] = *c.api;
    return j;
}

SessionConfig config_from_json(const nlohmann::json& j) {
    try {
        SessionConfig c;
        c.scenario_kind = j.value("scenario_kind", c.scenario_kind);
        c.backend = j.value("backend", c.backend);
        c.seed = j.value("seed", c.seed);
        c.auto_confirm = j.value("auto_confirm", c.auto_confirm);
        c.ms_per_word = j.value("ms_per_word", c.ms_per_word);
        c.gripper_ms = j.value("gripper_ms", c.gripper_ms);
        c.dmp_default_frames = j.value("dmp_default_frames", c.dmp_default_frames);
        c.keypoint_radius_px = j.value("keypoint_radius_px", c.keypoint_radius_px);
        c.demo_min_interval_ms = j.value("demo_min_interval_ms", c.demo_min_interval_ms);
        if (j.contains("scene")) c.scene = scene_from_json(j["scene"]);
        if (j.contains("workspace")) c.workspace = workspace_config_from_json(j["workspace"]);
        if (j.contains("effector_start")) c.effector_start = pose_from_json(j["effector_start"]);
        for (const auto& g : j.value("groundings", nlohmann::json::array())) {
            const auto source = g.value("source", std::string("model"));
            if (source != "model" && source != "click") {
                throw Error(ErrorCode::MalformedDocument, "grounding source must be model or click");
            }
            c.groundings.push_back({g.at("name").get<std::string>(), g.at("object").get<std::string>(),
                                    source == "model" ? GroundingSource::model : GroundingSource::click});
        }
        if (j.contains("errors")) {
            const auto& e = j["errors"];
            c.errors.model_p_err = e.value("model_p_err", 0.0);
            c.errors.click_p_err = e.value("click_p_err", 0.0);
            if (e.contains("per_name")) c.errors.per_name = e["per_name"].get<std::map<std::string, double>>();
        }
        if (j.contains("api")) c.api = j["api"];
        if (j.contains("lexicon")) c.lexicon = lexicon_from_json(j["lexicon"]);
        if (c.ms_per_word < 0 || c.gripper_ms < 0 || c.dmp_default_frames < 2 || c.demo_min_interval_ms < 0) {
            throw Error(ErrorCode::InvalidArgument, "session timing parameters out of range");
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedDocument, std::string("bad session config: ") + e.what());
    }
}

// ---- state ----------------------------------------------------------------

std::string mode_name(Mode mode) {
    switch (mode) {
        case Mode::Idle: return "Idle";
        case Mode::AwaitingConfirmation: return "AwaitingConfirmation";
        case Mode::Teaching: return "Teaching";
        case Mode::Executing: return "Executing";
    }
    return "?";
}

std::string teach_kind_name(TeachKind kind) {
    switch (kind) {
        case TeachKind::argument: return "argument";
        case TeachKind::function: return "function";
        case TeachKind::dmp: return "dmp";
    }
    return "?";
}

nlohmann::json state_summary(const SessionState& s) {
    nlohmann::json j{{"mode", mode_name(s.mode)},
                     {"api_version", s.api.version()},
                     {"clock_ms", s.clock_ms},
                     {"prompt", s.prompt},
                     {"segment", s.segment},
                     {"pending", nlohmann::json::array()},
                     {"effector", effector_to_json(s.workspace.effector)},
                     {"scene", scene_to_json(s.workspace.scene)},
                     {"groundings", registry_to_json(s.workspace.registry)}};
    if (s.teaching) j["teach_kind"] = teach_kind_name(s.teaching->kind);
    for (const auto& p : s.pending) j["pending"].push_back(delta_to_json(p.delta));
    if (s.awaiting) j["plan"] = pretty_print(s.awaiting->plan);
    return j;
}

// ---- session --------------------------------------------------------------

namespace {

Lexicon session_lexicon(const SessionConfig& config) {
    Lexicon lex = config.lexicon;
    lex.merge(Lexicon::for_scenario(config.scenario_kind));
    return lex;
}

bool supervised(Mode m) { return m == Mode::AwaitingConfirmation || m == Mode::Teaching; }

std::string delta_kind(const ApiDelta& d) {
    if (std::holds_alternative<AddLiteral>(d.change)) return "argument";
    const auto& fn = std::get<AddFunction>(d.change).function;
    const auto* prim = std::get_if<PrimitiveBody>(&fn.body);
    return prim != nullptr && prim->kind == PrimitiveKind::dmp ? "dmp" : "function";
}

std::string dmp_skill_of(const ApiDelta& d) {
    if (const auto* add = std::get_if<AddFunction>(&d.change)) {
        if (const auto* prim = std::get_if<PrimitiveBody>(&add->function.body); prim && prim->kind == PrimitiveKind::dmp) {
            return prim->skill_id;
        }
    }
    return {};
}

std::int64_t to_ms(double seconds) { return static_cast<std::int64_t>(std::llround(seconds * 1000.0)); }

}  // namespace

std::shared_ptr<PlannerBackend> make_default_backend(const SessionConfig& config) {
    if (config.backend != "det") {
        throw Error(ErrorCode::BackendUnavailable, "backend '" + config.backend + "' is not available in-process");
    }
    return std::make_shared<DeterministicBackend>(session_lexicon(config));
}

Session::Session(SessionConfig config, std::shared_ptr<PlannerBackend> backend)
    : config_(std::move(config)), backend_(backend ? std::move(backend) : make_default_backend(config_)) {
    state_.api = config_.api ? restore(*config_.api) : seed_api(config_.scenario_kind);
    auto& ws = state_.workspace;
    ws.scene = config_.scene;
    ws.config = config_.workspace;
    ws.rng.seed(config_.seed);
    if (config_.effector_start) {
        ws.effector.pose = *config_.effector_start;
    } else if (const auto* home = state_.api.find_literal("HOME"); home && std::holds_alternative<Pose>(home->value)) {
        ws.effector.pose = std::get<Pose>(home->value);
        ws.effector.pose.position.z() += ws.config.hover_height;
    } else {
        ws.effector.pose = Pose::at(0.5, 0.0, 0.5);
    }
    if (!ws.scene.bounds.contains(ws.effector.pose.position)) {
        throw Error(ErrorCode::InvalidArgument, "effector starts outside the workspace");
    }
    for (const auto& g : config_.groundings) {
        const auto* lit = state_.api.find_literal(g.name);
        if (!lit || lit->type != kObjectRefType) {
            throw Error(ErrorCode::InvalidArgument, "grounding for unknown object literal " + g.name);
        }
        if (!ws.scene.find(g.object_id)) throw Error(ErrorCode::InvalidArgument, "grounding to unknown object " + g.object_id);
        double p = g.source == GroundingSource::model ? config_.errors.model_p_err : config_.errors.click_p_err;
        if (auto it = config_.errors.per_name.find(g.name); it != config_.errors.per_name.end()) p = it->second;
        ws.registry.bind(g.name, {g.object_id, g.source, p});
    }
    state_.metrics.segments.push_back(SegmentMetrics{});
    emit("session_start", {{"config", config_to_json(config_)}, {"api_version", state_.api.version()}});
}

void Session::emit(std::string kind, nlohmann::json payload) { log_.append(state_.clock_ms, std::move(kind), std::move(payload)); }

void Session::message(std::string text) {
    emit("message", {{"text", text}});
    state_.prompt = std::move(text);
}

void Session::set_mode(Mode mode, std::optional<TeachKind> kind) {
    if (mode != Mode::Teaching) kind.reset();
    if (state_.mode == mode && state_.mode_kind == kind) return;
    const std::int64_t span = state_.clock_ms - state_.mode_since_ms;
    if (supervised(state_.mode)) {
        state_.metrics.supervision_ms += span;
        state_.metrics.segments[state_.segment].supervision_ms += span;
    }
    nlohmann::json payload{{"from", mode_name(state_.mode)}, {"to", mode_name(mode)}};
    if (kind) payload["teach_kind"] = teach_kind_name(*kind);
    state_.mode = mode;
    state_.mode_kind = kind;
    state_.mode_since_ms = state_.clock_ms;
    if (state_.teaching && kind) state_.teaching->kind = *kind;
    emit("mode", std::move(payload));
}

ApiSpec Session::tentative_api() const {
    ApiSpec api = state_.api;
    for (const auto& p : state_.pending) api = apply_delta(api, p.delta);
    return api;
}

ParseOutcome Session::plan_for(const Utterance& u) {
    try {
        return plan(u, tentative_api(), state_.history, *backend_);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::BackendUnavailable && e.code() != ErrorCode::MalformedResponse) throw;
        return Malformed{fmt::format("{}: {}", to_string(e.code()), e.what())};
    }
}

std::optional<Session::Rejection> Session::check(const SessionInput& input) const {
    const Mode m = state_.mode;
    const auto teaching = [&](TeachKind k) { return m == Mode::Teaching && state_.teaching && state_.teaching->kind == k; };
    const auto need = [&](bool ok, const char* what) -> std::optional<Rejection> {
        if (ok) return std::nullopt;
        std::string mode = mode_name(m);
        if (m == Mode::Teaching && state_.teaching) mode += "(" + teach_kind_name(state_.teaching->kind) + ")";
        return Rejection{fmt::format("{} is not accepted in mode {}", what, mode)};
    };
    return std::visit(
        [&](const auto& in) -> std::optional<Rejection> {
            using T = std::decay_t<decltype(in)>;
            if constexpr (std::is_same_v<T, UtteranceInput>) return need(m == Mode::Idle, "an utterance");
            if constexpr (std::is_same_v<T, ConfirmInput>) return need(m == Mode::AwaitingConfirmation, "confirm");
            if constexpr (std::is_same_v<T, CancelInput>) {
                return need(m == Mode::AwaitingConfirmation || m == Mode::Teaching, "cancel");
            }
            if constexpr (std::is_same_v<T, KeypointInput>) {
                return need(teaching(TeachKind::argument) || (m == Mode::Idle && !in.name.empty()), "a keypoint");
            }
            if constexpr (std::is_same_v<T, PoseInput>) return need(teaching(TeachKind::argument), "a pose");
            if constexpr (std::is_same_v<T, DecompositionInput>) {
                return need(teaching(TeachKind::function), "a decomposition");
            }
            if constexpr (std::is_same_v<T, DemoBeginInput>) return need(teaching(TeachKind::function), "demo begin");
            if constexpr (std::is_same_v<T, DemoAppendInput>) return need(teaching(TeachKind::dmp), "demo poses");
            if constexpr (std::is_same_v<T, DemoEndInput>) return need(teaching(TeachKind::dmp), "demo end");
            if constexpr (std::is_same_v<T, SegmentInput>) return need(m == Mode::Idle, "a segment marker");
            if constexpr (std::is_same_v<T, InterruptInput>) return std::nullopt;
        },
        input);
}

SubmitResult Session::submit(const SessionInput& input, std::int64_t t_ms) {
    state_.clock_ms = std::max(state_.clock_ms, t_ms);
    SubmitResult result;
    result.first_seq = log_.size() + 1;
    if (auto rejection = check(input)) {
        emit("rejected", {{"input", input_to_json(input)}, {"mode", mode_name(state_.mode)}, {"reason", rejection->reason}});
        result.accepted = false;
        result.reason = rejection->reason;
    } else {
        last_error_.clear();
        apply(input);
        result.error = last_error_;
    }
    result.last_seq = log_.size();
    return result;
}

SubmitResult Session::submit_after(const SessionInput& input, std::int64_t after_ms) {
    return submit(input, state_.clock_ms + std::max<std::int64_t>(0, after_ms));
}

void Session::request_interrupt() { interrupt_requested_.store(true); }

void Session::apply(const SessionInput& input) {
    std::visit(
        [&](const auto& in) {
            using T = std::decay_t<decltype(in)>;
            if constexpr (std::is_same_v<T, UtteranceInput>) on_utterance(in);
            if constexpr (std::is_same_v<T, ConfirmInput>) {
                emit("confirm", {{"input", input_to_json(input)},
                                 {"accept", in.accept},
                                 {"latency_ms", state_.clock_ms - state_.awaiting->since_ms}});
                on_confirm(in.accept);
            }
            if constexpr (std::is_same_v<T, CancelInput>) {
                emit("cancel", {{"input", input_to_json(input)}, {"mode", mode_name(state_.mode)}});
                on_cancel();
            }
            if constexpr (std::is_same_v<T, KeypointInput> || std::is_same_v<T, PoseInput> ||
                          std::is_same_v<T, DecompositionInput> || std::is_same_v<T, DemoBeginInput> ||
                          std::is_same_v<T, DemoAppendInput> || std::is_same_v<T, DemoEndInput>) {
                nlohmann::json payload{{"input", input_to_json(input)}};
                if (state_.teaching) payload["teach_id"] = state_.teaching->teach_id;
                emit("teach_input", std::move(payload));
                if constexpr (std::is_same_v<T, KeypointInput>) on_keypoint(in);
                if constexpr (std::is_same_v<T, PoseInput>) on_pose(in);
                if constexpr (std::is_same_v<T, DecompositionInput>) on_decomposition(in);
                if constexpr (std::is_same_v<T, DemoBeginInput>) on_demo_begin();
                if constexpr (std::is_same_v<T, DemoAppendInput>) on_demo_append(in);
                if constexpr (std::is_same_v<T, DemoEndInput>) on_demo_end();
            }
            if constexpr (std::is_same_v<T, SegmentInput>) on_segment(in);
            if constexpr (std::is_same_v<T, InterruptInput>) on_interrupt(in);
        },
        input);
}

void Session::on_utterance(const UtteranceInput& in) {
    Utterance u{fmt::format("u{}", ++state_.utterance_counter), in.text, state_.clock_ms};
    const auto words = static_cast<std::int64_t>(text::tokenize(in.text).size());
    const std::int64_t entry_ms = words * config_.ms_per_word;
    emit("utterance", {{"input", input_to_json(UtteranceInput{in.text})},
                       {"id", u.id},
                       {"text", u.text},
                       {"entry_ms", entry_ms},
                       {"segment", state_.segment}});
    state_.metrics.commands_spoken += 1;
    state_.metrics.segments[state_.segment].commands_spoken += 1;
    state_.metrics.supervision_ms += entry_ms;
    state_.metrics.segments[state_.segment].supervision_ms += entry_ms;

    const ParseOutcome outcome = plan_for(u);
    state_.history.append({u, outcome, ""});
    process_outcome(u, outcome);
}

void Session::process_outcome(const Utterance& u, const ParseOutcome& outcome) {
    nlohmann::json plan_payload{{"utterance_id", u.id}, {"outcome", outcome_to_json(outcome)}};
    if (const auto* ok = std::get_if<PlanOk>(&outcome)) plan_payload["plan"] = pretty_print(ok->plan);
    emit("plan", std::move(plan_payload));

    if (const auto* ok = std::get_if<PlanOk>(&outcome)) {
        const ApiSpec api = tentative_api();
        ResolvedProgram program = resolve_plan(ok->plan, api);
        std::string ungrounded;
        for (const auto& call : program.calls) {
            for (const auto& arg : call.args) {
                const auto* obj = std::get_if<ObjectTarget>(&arg);
                if (!obj || !ungrounded.empty()) continue;
                const auto* g = state_.workspace.registry.lookup(obj->canonical_name);
                if (!g || !state_.workspace.scene.find(g->object_id)) ungrounded = obj->canonical_name;
            }
        }
        if (!ungrounded.empty()) {
            begin_teaching(TeachKind::argument, u, ungrounded, {{"grounding_only", true}});
            state_.teaching->grounding_name = ungrounded;
            state_.prompt = fmt::format("I cannot find the {} in the scene. Could you click on it?",
                                        surface_from_canonical(ungrounded));
            emit("prompt", {{"text", state_.prompt}});
            return;
        }
        std::vector<dmp::Trajectory> preview = preview_trajectory(program, state_.workspace);
        emit("resolved_program", {{"utterance_id", u.id}, {"program", program_to_json(program)}});
        nlohmann::json trajs = nlohmann::json::array();
        for (const auto& t : preview) trajs.push_back(trajectory_to_json(t));
        emit("preview", {{"utterance_id", u.id}, {"trajectories", trajs}});
        state_.teaching.reset();
        state_.awaiting = AwaitingContext{u, ok->plan, std::move(program), std::move(preview), state_.clock_ms};
        state_.prompt = fmt::format("Plan: {}. Confirm to execute.", pretty_print(ok->plan));
        set_mode(Mode::AwaitingConfirmation);
        emit("prompt", {{"text", state_.prompt}});
        if (config_.auto_confirm) {
            emit("confirm", {{"accept", true}, {"auto", true}, {"latency_ms", 0}});
            on_confirm(true);
        }
        return;
    }
    if (const auto* arg = std::get_if<TeachArgument>(&outcome)) {
        ArgumentTeachRequest req = make_argument_request(*arg);
        begin_teaching(TeachKind::argument, u, req.proposed_canonical_name,
                       {{"type", req.inferred_type.name}, {"surface", req.surface_text}, {"function", req.function_name}});
        state_.teaching->argument = req;
        if (req.inferred_type.name == kLocationType) {
            state_.prompt = fmt::format("Where is {}? Move the gripper there and send the pose.", req.surface_text);
        } else {
            state_.prompt = fmt::format("What is the {}? Could you click on it?", req.surface_text);
        }
        emit("prompt", {{"text", state_.prompt}});
        return;
    }
    if (const auto* fn = std::get_if<TeachFunction>(&outcome)) {
        begin_teaching(TeachKind::function, u, fn->surface_verb, {});
        state_.teaching->surface_verb = fn->surface_verb;
        state_.prompt = fn->message;
        emit("prompt", {{"text", state_.prompt}});
        return;
    }
    const auto& bad = std::get<Malformed>(outcome);
    state_.history.set_result(u.id, "malformed");
    rollback_pending("re-planning failed");
    state_.teaching.reset();
    message(fmt::format("Sorry, I could not make a plan: {}", bad.reason));
    set_mode(Mode::Idle);
}

void Session::begin_teaching(TeachKind kind, const Utterance& u, std::string target, nlohmann::json detail) {
    TeachContext ctx;
    ctx.teach_id = fmt::format("t{}", ++state_.teach_counter);
    ctx.kind = kind;
    ctx.utterance = u;
    nlohmann::json payload{{"teach_id", ctx.teach_id},
                           {"kind", teach_kind_name(kind)},
                           {"utterance_id", u.id},
                           {"target", std::move(target)}};
    if (detail.is_object()) payload.update(detail);
    emit("teach_begin", std::move(payload));
    state_.teaching = std::move(ctx);
    set_mode(Mode::Teaching, kind);
}

void Session::add_pending(ApiDelta delta, const std::string& kind) {
    const std::string teach_id = state_.teaching ? state_.teaching->teach_id : std::string{};
    emit("delta", {{"teach_id", teach_id}, {"kind", kind}, {"delta", delta_to_json(delta)}});
    state_.pending.push_back({teach_id, std::move(delta)});
}

void Session::replan() {
    const Utterance u = state_.teaching->utterance;
    const ParseOutcome outcome = plan_for(u);
    state_.history.append({u, outcome, ""});
    process_outcome(u, outcome);
}

void Session::on_keypoint(const KeypointInput& in) {
    auto& ws = state_.workspace;
    const SceneObject* obj = ws.scene.object_at_keypoint(in.px, config_.keypoint_radius_px);
    if (state_.mode == Mode::Idle) {
        // Correcting the grounding of a known object.
        const auto* lit = state_.api.find_literal(in.name);
        if (!lit || lit->type != kObjectRefType) {
            fail_input(ErrorCode::UnknownLiteral, fmt::format("{} is not a known object", in.name));
            return;
        }
        if (!obj) {
            fail_input(ErrorCode::NoObjectAtKeypoint, fmt::format("there is no object at ({}, {})", in.px.u, in.px.v));
            return;
        }
        try {
            ws.registry.bind(in.name, {obj->id, GroundingSource::click, config_.errors.click_p_err});
        } catch (const Error& e) {
            fail_input(e.code(), e.what());
            return;
        }
        ws.registry.record_click({in.name, obj->id, in.px, state_.clock_ms});
        emit("grounding", {{"name", in.name}, {"object_id", obj->id}, {"source", "click"}});
        return;
    }
    auto& teach = *state_.teaching;
    if (!obj) {
        fail_input(ErrorCode::NoObjectAtKeypoint, fmt::format("there is no object at ({}, {})", in.px.u, in.px.v));
        return;
    }
    if (!teach.grounding_name.empty()) {
        try {
            ws.registry.bind(teach.grounding_name, {obj->id, GroundingSource::click, config_.errors.click_p_err});
        } catch (const Error& e) {
            fail_input(e.code(), e.what());
            return;
        }
        ws.registry.record_click({teach.grounding_name, obj->id, in.px, state_.clock_ms});
        emit("grounding", {{"name", teach.grounding_name}, {"object_id", obj->id}, {"source", "click"}});
        emit("teach_commit", {{"teach_id", teach.teach_id},
                              {"kind", "grounding"},
                              {"name", teach.grounding_name},
                              {"api_version", state_.api.version()}});
        replan();
        return;
    }
    const ArgumentTeachRequest& req = *teach.argument;
    ApiDelta delta;
    try {
        delta = synthesize_literal(req, Description{obj->description}, tentative_api(), teach.utterance.id);
        const std::string name = delta.added_name();
        if (const auto* g = ws.registry.lookup(name); g && g->object_id != obj->id) {
            throw Error(ErrorCode::GroundingConflict, fmt::format("{} already refers to {}", name, g->object_id));
        }
        ws.registry.bind(name, {obj->id, GroundingSource::click, config_.errors.click_p_err});
        ws.registry.record_click({name, obj->id, in.px, state_.clock_ms});
        emit("grounding", {{"name", name}, {"object_id", obj->id}, {"source", "click"}});
    } catch (const Error& e) {
        fail_input(e.code(), e.what());
        return;
    }
    add_pending(std::move(delta), "argument");
    replan();
}

void Session::on_pose(const PoseInput& in) {
    auto& teach = *state_.teaching;
    if (!teach.argument) {
        fail_input(ErrorCode::GroundingTypeMismatch, "this prompt expects a click on an object");
        return;
    }
    if (!state_.workspace.scene.bounds.contains(in.pose.position)) {
        fail_input(ErrorCode::InvalidArgument, "the taught pose lies outside the workspace");
        return;
    }
    ApiDelta delta;
    try {
        delta = synthesize_literal(*teach.argument, in.pose, tentative_api(), teach.utterance.id);
    } catch (const Error& e) {
        fail_input(e.code(), e.what());
        return;
    }
    add_pending(std::move(delta), "argument");
    replan();
}

void Session::on_decomposition(const DecompositionInput& in) {
    auto& teach = *state_.teaching;
    const ApiSpec api = tentative_api();
    ApiDelta delta;
    try {
        FunctionTeachRequest req;
        req.surface_verb = teach.surface_verb;
        req.original_utterance_id = teach.utterance.id;
        req.decomposition = decomposition_from_input(in.text, api, *backend_, teach.utterance.id);
        req.annotations = in.annotations;
        LiftedFunction lifted = lift_decomposition(req, teach.utterance.text, api, backend_.get());
        nlohmann::json bindings = nlohmann::json::array();
        for (const auto& [param, lit] : lifted.bindings) bindings.push_back({{"param", param}, {"literal", lit.name}});
        emit("lifted", {{"teach_id", teach.teach_id}, {"function", function_to_json(lifted.function)}, {"bindings", bindings}});
        delta = function_delta(std::move(lifted.function), teach.utterance.id);
    } catch (const Error& e) {
        fail_input(e.code(), e.what());
        return;
    }
    add_pending(std::move(delta), "function");
    replan();
}

void Session::on_demo_begin() {
    state_.teaching->demo.clear();
    set_mode(Mode::Teaching, TeachKind::dmp);
}

void Session::on_demo_append(const DemoAppendInput& in) {
    auto& demo = state_.teaching->demo;
    const double min_gap = static_cast<double>(config_.demo_min_interval_ms) / 1000.0;
    std::size_t kept = 0;
    for (const auto& w : in.poses) {
        if (!w.pose.position.allFinite() || !std::isfinite(w.t)) continue;
        if (!demo.empty() && w.t < demo.back().t + min_gap - 1e-9) continue;
        demo.push_back(w);
        ++kept;
    }
    emit("demo_progress", {{"received", in.poses.size()}, {"kept", kept}, {"total", demo.size()}});
}

void Session::on_demo_end() {
    auto& teach = *state_.teaching;
    const auto& raw = teach.demo;
    std::size_t distinct = raw.empty() ? 0 : 1;
    for (std::size_t i = 1; i < raw.size(); ++i) {
        if ((raw[i].pose.position - raw[0].pose.position).norm() > 1e-6) {
            distinct = 2;
            break;
        }
    }
    if (distinct < 2) {
        teach.demo.clear();
        fail_input(ErrorCode::TooShortDemo, "the demonstration needs at least two distinct poses");
        set_mode(Mode::Teaching, TeachKind::function);
        return;
    }
    const ApiSpec api = tentative_api();
    auto& ws = state_.workspace;
    DmpSkill skill;
    ApiDelta delta;
    try {
        const dmp::Demonstration demo = dmp::Demonstration::from_waypoints(raw);
        skill.params = dmp::fit(demo);
        skill.demo = raw;
        skill.default_frames = config_.dmp_default_frames;

        // Anchor: the first object or location named in the taught command.
        const auto words = text::tokenize(teach.utterance.text);
        std::size_t best_pos = std::numeric_limits<std::size_t>::max();
        const Lexicon lex = session_lexicon(config_);
        auto consider = [&](const std::string& name, const std::string& phrase) {
            const auto* lit = api.find_literal(name);
            if (!lit || (lit->type != kObjectRefType && lit->type != kLocationType)) return;
            const auto needle = text::tokenize(phrase);
            if (needle.empty() || needle.size() > words.size()) return;
            for (std::size_t i = 0; i + needle.size() <= words.size() && i < best_pos; ++i) {
                std::vector<std::string> window(words.begin() + static_cast<std::ptrdiff_t>(i),
                                                words.begin() + static_cast<std::ptrdiff_t>(i + needle.size()));
                if (text::contains_phrase(window, needle)) {
                    best_pos = i;
                    skill.anchor_literal = name;
                    break;
                }
            }
        };
        for (const auto& lit : api.literals()) consider(lit.canonical_name, surface_from_canonical(lit.canonical_name));
        for (const auto& noun : lex.nouns) consider(noun.literal, noun.phrase);

        const Vec3 demo_goal = demo.resampled.back().pose.position;
        if (!skill.anchor_literal.empty()) {
            const auto* lit = api.find_literal(skill.anchor_literal);
            if (const auto* pose = std::get_if<Pose>(&lit->value)) {
                skill.goal_offset = demo_goal - pose->position;
            } else {
                const GroundResult g = ground_object(skill.anchor_literal, ws.registry, ws.scene, nullptr);
                skill.goal_offset = demo_goal - ws.scene.find(g.object_id)->pose.position;
            }
        }
        FunctionSpec fn = make_dmp_function(teach.surface_verb, "", skill.default_frames, api, backend_.get());
        skill.id = fn.name;
        std::get<PrimitiveBody>(fn.body).skill_id = skill.id;
        delta = function_delta(std::move(fn), teach.utterance.id);
    } catch (const Error& e) {
        teach.demo.clear();
        fail_input(e.code(), e.what());
        set_mode(Mode::Teaching, TeachKind::function);
        return;
    }
    nlohmann::json demo_positions = nlohmann::json::array();
    for (const auto& w : skill.demo) demo_positions.push_back(vec3_to_json(w.pose.position));
    emit("skill", {{"teach_id", teach.teach_id},
                   {"skill_id", skill.id},
                   {"anchor", skill.anchor_literal},
                   {"goal_offset", vec3_to_json(skill.goal_offset)},
                   {"demo", demo_positions},
                   {"params", dmp::params_to_json(skill.params)}});
    ws.skills[skill.id] = std::move(skill);
    add_pending(std::move(delta), "dmp");
    replan();
}

void Session::on_segment(const SegmentInput& in) {
    auto& ws = state_.workspace;
    ws.scene.objects = config_.scene.objects;
    ws.effector.gripper = Gripper::open;
    ws.effector.held_object.reset();
    state_.segment += 1;
    state_.metrics.segments.push_back(SegmentMetrics{in.label});
    emit("segment", {{"input", input_to_json(in)}, {"label", in.label}, {"index", state_.segment}});
}

void Session::on_interrupt(const InterruptInput& in) {
    state_.interrupt = ArmedInterrupt{in.at_step, false};
    emit("interrupt", {{"input", input_to_json(in)}, {"source", "input"}, {"at_step", in.at_step}, {"armed", true}});
}

void Session::on_cancel() {
    if (state_.awaiting) state_.history.set_result(state_.awaiting->utterance.id, "cancelled");
    if (state_.teaching) {
        const bool has_delta = std::any_of(state_.pending.begin(), state_.pending.end(),
                                           [&](const PendingTeach& p) { return p.teach_id == state_.teaching->teach_id; });
        if (!has_delta) emit("teach_rollback", {{"teach_id", state_.teaching->teach_id}, {"reason", "cancelled"}});
        state_.history.set_result(state_.teaching->utterance.id, "cancelled");
    }
    rollback_pending("cancelled");
    state_.awaiting.reset();
    state_.teaching.reset();
    state_.prompt.clear();
    set_mode(Mode::Idle);
}

void Session::on_confirm(bool accept) {
    if (!accept) {
        on_cancel();
        return;
    }
    state_.metrics.confirmed_commands += 1;
    state_.metrics.segments[state_.segment].confirmed_commands += 1;
    state_.metrics.commands.push_back({state_.awaiting->utterance.id, state_.segment, 0, false});
    set_mode(Mode::Executing);
    execute();
}

void Session::execute() {
    AwaitingContext ctx = std::move(*state_.awaiting);
    state_.awaiting.reset();
    interrupt_requested_.store(false);
    auto& ws = state_.workspace;
    std::optional<FailureReason> failure;
    std::size_t executed = 0;
    for (std::size_t i = 0; i < ctx.program.calls.size(); ++i) {
        const bool armed = state_.interrupt && state_.interrupt->at_step == i;
        if (armed || interrupt_requested_.exchange(false)) {
            const bool live = !armed || state_.interrupt->live;
            emit("interrupt", {{"source", live ? "live" : "input"}, {"step", i}, {"utterance_id", ctx.utterance.id}});
            failure = FailureReason::UserInterrupt;
            break;
        }
        const PrimitiveCall& call = ctx.program.calls[i];
        SkillOutcome out;
        try {
            out = execute_primitive(call, ws, true);
        } catch (const Error& e) {
            out.failure = FailureReason::OutOfBounds;
            out.detail = fmt::format("{}: {}", to_string(e.code()), e.what());
        }
        std::int64_t duration = to_ms(static_cast<double>(out.trajectory.poses.size()) * out.trajectory.dt);
        if (call.kind == PrimitiveKind::grasp || call.kind == PrimitiveKind::release) duration += config_.gripper_ms;
        state_.clock_ms += duration;
        ++executed;
        state_.metrics.primitive_calls += 1;
        state_.metrics.segments[state_.segment].primitive_calls += 1;
        state_.metrics.commands.back().primitive_calls += 1;

        nlohmann::json args = nlohmann::json::array();
        for (const auto& a : call.args) args.push_back(resolved_arg_to_json(a));
        nlohmann::json payload{{"utterance_id", ctx.utterance.id},
                               {"step", i},
                               {"tag", call.tag()},
                               {"args", args},
                               {"provenance", call.provenance},
                               {"status", out.ok() ? "success" : "failure"},
                               {"duration_ms", duration},
                               {"waypoints", out.trajectory.poses.size()},
                               {"trace", out.trace},
                               {"effector", effector_to_json(ws.effector)}};
        if (out.failure) {
            payload["reason"] = failure_reason_name(*out.failure);
            payload["detail"] = out.detail;
        }
        if (out.draw) payload["draw"] = *out.draw;
        emit("exec_step", std::move(payload));
        if (out.failure) {
            failure = out.failure;
            break;
        }
    }
    state_.interrupt.reset();

    nlohmann::json outcome{{"utterance_id", ctx.utterance.id},
                           {"status", failure ? "failure" : "success"},
                           {"steps_executed", executed},
                           {"steps_planned", ctx.program.calls.size()}};
    if (failure) {
        outcome["reason"] = failure_reason_name(*failure);
        state_.metrics.skill_failures += 1;
        state_.metrics.segments[state_.segment].skill_failures += 1;
        state_.metrics.commands.back().failed = true;
    }
    emit("outcome", std::move(outcome));
    if (failure) {
        state_.history.set_result(ctx.utterance.id, "failure: " + failure_reason_name(*failure));
        rollback_pending("execution failed");
        state_.prompt = fmt::format("That did not work ({}).", failure_reason_name(*failure));
    } else {
        state_.history.set_result(ctx.utterance.id, "success");
        commit_pending();
        state_.prompt.clear();
    }
    set_mode(Mode::Idle);
}

void Session::commit_pending() {
    for (auto& p : state_.pending) {
        const std::string kind = delta_kind(p.delta);
        state_.api = apply_delta(state_.api, p.delta);
        p.delta.status = DeltaStatus::committed;
        if (kind == "argument") state_.metrics.teach_counts.arguments += 1;
        if (kind == "function") state_.metrics.teach_counts.functions += 1;
        if (kind == "dmp") state_.metrics.teach_counts.dmp_skills += 1;
        state_.metrics.commits.push_back(
            {p.delta.added_name(), kind, static_cast<std::size_t>(state_.metrics.confirmed_commands)});
        emit("teach_commit", {{"teach_id", p.teach_id},
                              {"kind", kind},
                              {"name", p.delta.added_name()},
                              {"api_version", state_.api.version()}});
    }
    state_.pending.clear();
}

void Session::rollback_pending(const std::string& reason) {
    for (auto& p : state_.pending) {
        p.delta.status = DeltaStatus::rolled_back;
        if (const auto skill = dmp_skill_of(p.delta); !skill.empty()) state_.workspace.skills.erase(skill);
        emit("teach_rollback", {{"teach_id", p.teach_id}, {"name", p.delta.added_name()}, {"reason", reason}});
    }
    state_.pending.clear();
}

void Session::fail_input(ErrorCode code, const std::string& text) {
    last_error_ = to_string(code);
    emit("error", {{"code", last_error_}, {"message", text}});
}

nlohmann::json Session::preview_payload() const {
    nlohmann::json j = state_summary(state_);
    j["trajectories"] = nlohmann::json::array();
    j["demos"] = nlohmann::json::array();
    if (state_.awaiting) {
        for (const auto& t : state_.awaiting->preview) j["trajectories"].push_back(trajectory_to_json(t));
        j["program"] = program_to_json(state_.awaiting->program);
        for (const auto& call : state_.awaiting->program.calls) {
            if (call.kind != PrimitiveKind::dmp) continue;
            auto it = state_.workspace.skills.find(call.skill_id);
            if (it == state_.workspace.skills.end()) continue;
            nlohmann::json demo = nlohmann::json::array();
            for (const auto& w : it->second.demo) demo.push_back(vec3_to_json(w.pose.position));
            j["demos"].push_back({{"skill_id", call.skill_id}, {"positions", demo}});
        }
    }
    return j;
}

void Session::persist(std::ostream& out) const { log_.write_jsonl(out); }

std::unique_ptr<Session> Session::resume(const std::vector<LogRecord>& log, std::optional<std::uint64_t> seed,
                                         const BackendFactory& backends) {
    if (log.empty() || log.front().kind != "session_start") {
        throw Error(ErrorCode::CorruptLog, "log does not start with session_start");
    }
    SessionConfig config = config_from_json(log.front().payload.at("config"));
    if (seed) config.seed = *seed;
    auto session = std::make_unique<Session>(config, backends(config));

    const auto diverged = [](const LogRecord& expected, const LogRecord* actual) {
        return Error(ErrorCode::ReplayDivergence,
                     fmt::format("record {} ({}) was not reproduced{}", expected.seq, expected.kind,
                                 actual ? fmt::format(": got {}", record_to_json(*actual).dump()) : std::string{}));
    };
    // session_start differs only by an overridden seed.
    {
        LogRecord expected = log.front();
        LogRecord actual = session->log().front();
        expected.payload["config"].erase("seed");
        actual.payload["config"].erase("seed");
        if (!(expected == actual)) throw diverged(log.front(), &session->log().front());
    }
    std::size_t i = 1;
    while (i < log.size()) {
        const LogRecord& rec = log[i];
        if (!rec.payload.contains("input")) throw diverged(rec, i < session->log().size() ? &session->log()[i] : nullptr);
        std::size_t next = i + 1;
        while (next < log.size() && !log[next].payload.contains("input")) ++next;
        for (std::size_t k = i + 1; k < next; ++k) {
            if (log[k].kind == "interrupt" && log[k].payload.value("source", "") == "live") {
                session->state_.interrupt = ArmedInterrupt{log[k].payload.at("step").get<std::size_t>(), true};
            }
        }
        session->submit(input_from_json(rec.payload.at("input")), rec.t_ms);
        const auto& produced = session->log();
        for (std::size_t k = i; k < next; ++k) {
            if (k >= produced.size() || !(produced[k] == log[k])) throw diverged(log[k], k < produced.size() ? &produced[k] : nullptr);
        }
        if (produced.size() != next) throw diverged(log[std::min(next, log.size() - 1)], &produced[next]);
        i = next;
    }
    return session;
}

}  // namespace vsandbox
