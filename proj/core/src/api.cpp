// SPDX-License-Identifier: Apache-2.0
#include "vsandbox/api.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include <fmt/format.h>

#include "vsandbox/error.hpp"
#include "vsandbox/plan.hpp"

namespace vsandbox {

bool ParamType::accepts(const std::string& type) const {
    return std::find(alternatives.begin(), alternatives.end(), type) != alternatives.end();
}

bool ParamType::subset_of(const ParamType& other) const {
    return std::all_of(alternatives.begin(), alternatives.end(),
                       [&](const std::string& t) { return other.accepts(t); });
}

std::string ParamType::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < alternatives.size(); ++i) {
        if (i > 0) out += "|";
        out += alternatives[i];
    }
    return out;
}

std::string ground_value_kind(const GroundValue& v) {
    if (std::holds_alternative<Description>(v)) return "description";
    if (std::holds_alternative<Pose>(v)) return "pose";
    return "integer";
}

std::string primitive_kind_name(PrimitiveKind kind) {
    switch (kind) {
        case PrimitiveKind::go_home: return "go_home";
        case PrimitiveKind::go_to: return "goto";
        case PrimitiveKind::grasp: return "grasp";
        case PrimitiveKind::release: return "release";
        case PrimitiveKind::dmp: return "dmp";
    }
    return "unknown";
}

std::optional<PrimitiveKind> primitive_kind_from_name(const std::string& name) {
    for (auto k : {PrimitiveKind::go_home, PrimitiveKind::go_to, PrimitiveKind::grasp, PrimitiveKind::release,
                   PrimitiveKind::dmp}) {
        if (primitive_kind_name(k) == name) return k;
    }
    return std::nullopt;
}

std::size_t FunctionSpec::required_arity() const {
    std::size_t n = 0;
    while (n < params.size() && !params[n].default_value) ++n;
    return n;
}

const Parameter* FunctionSpec::find_param(const std::string& param_name) const {
    for (const auto& p : params) {
        if (p.name == param_name) return &p;
    }
    return nullptr;
}

ApiSpec::ApiSpec(std::uint64_t version, std::vector<SemanticType> types, std::vector<FunctionSpec> functions,
                 std::vector<LiteralArg> literals)
    : version_(version), types_(std::move(types)), functions_(std::move(functions)), literals_(std::move(literals)) {
    validate();
}

bool ApiSpec::has_type(const std::string& name) const {
    return std::any_of(types_.begin(), types_.end(), [&](const SemanticType& t) { return t.name == name; });
}

const FunctionSpec* ApiSpec::find_function(const std::string& name) const {
    for (const auto& f : functions_) {
        if (f.name == name) return &f;
    }
    return nullptr;
}

const LiteralArg* ApiSpec::find_literal(const std::string& canonical_name) const {
    for (const auto& l : literals_) {
        if (l.canonical_name == canonical_name) return &l;
    }
    return nullptr;
}

std::vector<const LiteralArg*> ApiSpec::literals_of(const std::string& type) const {
    std::vector<const LiteralArg*> out;
    for (const auto& l : literals_) {
        if (l.type == type) out.push_back(&l);
    }
    return out;
}

namespace {

void check_literal_value(const LiteralArg& lit) {
    if (const auto* pose = std::get_if<Pose>(&lit.value); pose && !is_unit(pose->orientation)) {
        throw Error(ErrorCode::InvalidArgument,
                    fmt::format("literal {}.{} has a non-unit orientation", lit.type, lit.canonical_name));
    }
}

void check_function_shape(const FunctionSpec& fn, const ApiSpec& api) {
    bool seen_default = false;
    std::set<std::string> names;
    for (const auto& p : fn.params) {
        if (!names.insert(p.name).second) {
            throw Error(ErrorCode::NameCollision, fmt::format("{}: duplicate parameter '{}'", fn.name, p.name));
        }
        if (p.type.alternatives.empty()) {
            throw Error(ErrorCode::UnknownReference, fmt::format("{}: parameter '{}' has no type", fn.name, p.name));
        }
        for (const auto& t : p.type.alternatives) {
            if (!api.has_type(t)) {
                throw Error(ErrorCode::UnknownReference, fmt::format("{}: unknown type '{}'", fn.name, t));
            }
        }
        if (p.default_value) {
            seen_default = true;
        } else if (seen_default) {
            throw Error(ErrorCode::InvalidArgument,
                        fmt::format("{}: parameter '{}' without default follows a defaulted one", fn.name, p.name));
        }
    }
    if (!api.has_type(fn.returns)) {
        throw Error(ErrorCode::UnknownReference, fmt::format("{}: unknown return type '{}'", fn.name, fn.returns));
    }
}

void check_body(const FunctionSpec& fn, const ApiSpec& api) {
    const auto* composed = std::get_if<ComposedBody>(&fn.body);
    if (composed == nullptr) return;
    if (composed->steps.empty()) {
        throw Error(ErrorCode::InvalidArgument, fmt::format("{}: composed body is empty", fn.name));
    }
    for (const auto& step : composed->steps) {
        try {
            check_invocation(step, api, &fn);
        } catch (const Error& e) {
            switch (e.code()) {
                case ErrorCode::UnknownFunction:
                case ErrorCode::UnknownLiteral:
                case ErrorCode::UnboundParameter:
                    throw Error(ErrorCode::UnknownReference, fmt::format("{}: {}", fn.name, e.what()));
                default: throw;
            }
        }
    }
}

void check_acyclic(const std::vector<FunctionSpec>& functions) {
    std::map<std::string, const FunctionSpec*> by_name;
    for (const auto& f : functions) by_name[f.name] = &f;
    enum class Mark { none, active, done };
    std::map<std::string, Mark> mark;
    std::function<void(const FunctionSpec&)> visit = [&](const FunctionSpec& f) {
        mark[f.name] = Mark::active;
        if (const auto* c = std::get_if<ComposedBody>(&f.body)) {
            for (const auto& step : c->steps) {
                auto it = by_name.find(step.function);
                if (it == by_name.end()) continue;
                const Mark m = mark[step.function];
                if (m == Mark::active) {
                    throw Error(ErrorCode::CycleDetected,
                                fmt::format("call cycle through '{}' and '{}'", f.name, step.function));
                }
                if (m == Mark::none) visit(*it->second);
            }
        }
        mark[f.name] = Mark::done;
    };
    for (const auto& f : functions) {
        if (mark[f.name] == Mark::none) visit(f);
    }
}

}  // namespace

void ApiSpec::validate() const {
    std::set<std::string> seen;
    for (const auto& t : types_) {
        if (t.name.empty() || !seen.insert(t.name).second) {
            throw Error(ErrorCode::NameCollision, fmt::format("duplicate or empty type '{}'", t.name));
        }
    }
    seen.clear();
    for (const auto& l : literals_) {
        if (!has_type(l.type)) {
            throw Error(ErrorCode::UnknownReference, fmt::format("literal {} has unknown type {}", l.canonical_name, l.type));
        }
        if (!seen.insert(l.canonical_name).second) {
            throw Error(ErrorCode::NameCollision, fmt::format("duplicate literal '{}'", l.canonical_name));
        }
        check_literal_value(l);
    }
    seen.clear();
    for (const auto& f : functions_) {
        if (!seen.insert(f.name).second) {
            throw Error(ErrorCode::NameCollision, fmt::format("duplicate function '{}'", f.name));
        }
    }
    check_acyclic(functions_);
    for (const auto& f : functions_) {
        check_function_shape(f, *this);
        check_body(f, *this);
    }
}

std::string delta_status_name(DeltaStatus s) {
    switch (s) {
        case DeltaStatus::pending: return "pending";
        case DeltaStatus::committed: return "committed";
        case DeltaStatus::rolled_back: return "rolled_back";
    }
    return "unknown";
}

std::string ApiDelta::added_name() const {
    if (const auto* l = std::get_if<AddLiteral>(&change)) return l->literal.canonical_name;
    return std::get<AddFunction>(change).function.name;
}

ApiSpec apply_delta(const ApiSpec& api, const ApiDelta& delta) {
    if (delta.status != DeltaStatus::pending) {
        throw Error(ErrorCode::InvalidDelta,
                    fmt::format("delta for '{}' is {}, not pending", delta.added_name(), delta_status_name(delta.status)));
    }
    auto functions = api.functions();
    auto literals = api.literals();
    if (const auto* add = std::get_if<AddLiteral>(&delta.change)) {
        if (api.find_literal(add->literal.canonical_name) != nullptr) {
            throw Error(ErrorCode::NameCollision, fmt::format("literal '{}' already exists", add->literal.canonical_name));
        }
        literals.push_back(add->literal);
    } else {
        const auto& fn = std::get<AddFunction>(delta.change).function;
        if (api.find_function(fn.name) != nullptr) {
            throw Error(ErrorCode::NameCollision, fmt::format("function '{}' already exists", fn.name));
        }
        // Existing functions cannot reach a name that does not exist yet, so a
        // cycle through the new function must start with a direct self-call.
        if (const auto* c = std::get_if<ComposedBody>(&fn.body)) {
            for (const auto& step : c->steps) {
                if (step.function == fn.name) {
                    throw Error(ErrorCode::CycleDetected, fmt::format("'{}' calls itself", fn.name));
                }
            }
        }
        functions.push_back(fn);
        functions.back().taught_at = api.version() + 1;
    }
    return ApiSpec(api.version() + 1, api.types(), std::move(functions), std::move(literals));
}

namespace {

std::string python_value(const GroundValue& v) {
    if (const auto* d = std::get_if<Description>(&v)) return nlohmann::json(d->text).dump();
    if (const auto* p = std::get_if<Pose>(&v)) {
        return fmt::format("Pose(position=[{}, {}, {}], orientation=[{}, {}, {}, {}])", p->position.x(),
                           p->position.y(), p->position.z(), p->orientation.w(), p->orientation.x(),
                           p->orientation.y(), p->orientation.z());
    }
    return std::to_string(std::get<std::int64_t>(v));
}

std::string python_type(const ParamType& t) {
    std::string out;
    for (std::size_t i = 0; i < t.alternatives.size(); ++i) {
        if (i > 0) out += " | ";
        out += t.alternatives[i] == kCountType ? "int" : t.alternatives[i];
    }
    return out;
}

std::string python_argument(const Argument& arg) {
    if (const auto* i = std::get_if<IntegerArg>(&arg)) return std::to_string(i->value);
    return format_argument(arg);
}

}  // namespace

std::string render_prompt(const ApiSpec& api) {
    std::string out = "```python\nfrom enum import Enum\n";
    for (const auto& t : api.types()) {
        if (t.name == kCountType || t.name == kNoneType) continue;
        out += fmt::format("\n\nclass {}(Enum):\n", t.name);
        auto lits = api.literals_of(t.name);
        if (lits.empty()) out += "    pass\n";
        for (const auto* l : lits) out += fmt::format("    {} = {}\n", l->canonical_name, python_value(l->value));
    }
    for (const auto& f : api.functions()) {
        std::string params;
        for (std::size_t i = 0; i < f.params.size(); ++i) {
            if (i > 0) params += ", ";
            params += f.params[i].name + ": " + python_type(f.params[i].type);
            if (f.params[i].default_value) params += " = " + python_argument(*f.params[i].default_value);
        }
        out += fmt::format("\n\ndef {}({}) -> {}:\n    \"\"\"{}\"\"\"\n", f.name, params, f.returns, f.docstring);
        if (const auto* c = std::get_if<ComposedBody>(&f.body)) {
            for (const auto& step : c->steps) out += "    " + format_invocation(step) + "\n";
        } else {
            out += "    ...\n";
        }
    }
    out += "```\n";
    return out;
}

// ---------------------------------------------------------------------------
// Snapshot document (schema 1)

namespace {

constexpr int kSchemaVersion = 1;

nlohmann::json value_to_json(const GroundValue& v) {
    if (const auto* d = std::get_if<Description>(&v)) return {{"description", d->text}};
    if (const auto* p = std::get_if<Pose>(&v)) return {{"pose", pose_to_json(*p)}};
    return {{"integer", std::get<std::int64_t>(v)}};
}

GroundValue value_from_json(const nlohmann::json& j) {
    if (j.contains("description")) return Description{j.at("description").get<std::string>()};
    if (j.contains("pose")) return pose_from_json(j.at("pose"));
    if (j.contains("integer")) return j.at("integer").get<std::int64_t>();
    throw Error(ErrorCode::MalformedDocument, "literal value must be description, pose, or integer");
}

Argument argument_from_text(const std::string& text) {
    auto syntax = parse_invocations("f(" + text + ")", true);
    if (syntax.error || syntax.invocations.size() != 1 || syntax.invocations[0].args.size() != 1) {
        throw Error(ErrorCode::MalformedDocument, "bad default argument '" + text + "'");
    }
    return syntax.invocations[0].args[0];
}

}  // namespace

nlohmann::json literal_to_json(const LiteralArg& literal) {
    return {{"type", literal.type}, {"name", literal.canonical_name}, {"value", value_to_json(literal.value)}};
}

LiteralArg literal_from_json(const nlohmann::json& j) {
    return {j.at("type").get<std::string>(), j.at("name").get<std::string>(), value_from_json(j.at("value"))};
}

nlohmann::json function_to_json(const FunctionSpec& fn) {
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : fn.params) {
        nlohmann::json jp{{"name", p.name}, {"type", p.type.alternatives}};
        if (p.default_value) jp["default"] = format_argument(*p.default_value);
        params.push_back(std::move(jp));
    }
    nlohmann::json body;
    if (const auto* prim = std::get_if<PrimitiveBody>(&fn.body)) {
        body["primitive"] = primitive_kind_name(prim->kind);
        if (prim->kind == PrimitiveKind::dmp) body["skill_id"] = prim->skill_id;
    } else {
        body["composed"] = format_invocations(std::get<ComposedBody>(fn.body).steps);
    }
    nlohmann::json j{{"name", fn.name}, {"params", params}, {"returns", fn.returns}, {"docstring", fn.docstring},
                     {"body", body}};
    j["origin"] = fn.taught_at ? nlohmann::json{{"taught_at", *fn.taught_at}} : nlohmann::json{{"builtin", true}};
    return j;
}

FunctionSpec function_from_json(const nlohmann::json& j) {
    FunctionSpec fn;
    fn.name = j.at("name").get<std::string>();
    for (const auto& jp : j.at("params")) {
        Parameter p{jp.at("name").get<std::string>(), ParamType{jp.at("type").get<std::vector<std::string>>()},
                    std::nullopt};
        if (jp.contains("default")) p.default_value = argument_from_text(jp.at("default").get<std::string>());
        fn.params.push_back(std::move(p));
    }
    fn.returns = j.value("returns", std::string(kNoneType));
    fn.docstring = j.value("docstring", std::string{});
    const auto& body = j.at("body");
    if (body.contains("primitive")) {
        auto kind = primitive_kind_from_name(body.at("primitive").get<std::string>());
        if (!kind) throw Error(ErrorCode::MalformedDocument, "unknown primitive in " + fn.name);
        fn.body = PrimitiveBody{*kind, body.value("skill_id", std::string{})};
    } else {
        auto syntax = parse_invocations(body.at("composed").get<std::string>(), true);
        if (syntax.error) throw Error(ErrorCode::MalformedDocument, fn.name + ": " + *syntax.error);
        fn.body = ComposedBody{std::move(syntax.invocations)};
    }
    const auto& origin = j.at("origin");
    if (origin.contains("taught_at")) fn.taught_at = origin.at("taught_at").get<std::uint64_t>();
    return fn;
}

nlohmann::json delta_to_json(const ApiDelta& delta) {
    nlohmann::json j{{"provenance", delta.provenance}, {"status", delta_status_name(delta.status)}};
    if (const auto* l = std::get_if<AddLiteral>(&delta.change)) {
        j["add_literal"] = literal_to_json(l->literal);
    } else {
        j["add_function"] = function_to_json(std::get<AddFunction>(delta.change).function);
    }
    return j;
}

ApiDelta delta_from_json(const nlohmann::json& j) {
    ApiDelta d;
    if (j.contains("add_literal")) {
        d.change = AddLiteral{literal_from_json(j.at("add_literal"))};
    } else {
        d.change = AddFunction{function_from_json(j.at("add_function"))};
    }
    d.provenance = j.value("provenance", std::string{});
    const auto status = j.value("status", std::string("pending"));
    d.status = status == "committed" ? DeltaStatus::committed
               : status == "rolled_back" ? DeltaStatus::rolled_back
                                         : DeltaStatus::pending;
    return d;
}

nlohmann::json snapshot(const ApiSpec& api) {
    nlohmann::json types = nlohmann::json::array();
    for (const auto& t : api.types()) types.push_back(t.name);
    nlohmann::json literals = nlohmann::json::array();
    for (const auto& l : api.literals()) literals.push_back(literal_to_json(l));
    nlohmann::json functions = nlohmann::json::array();
    for (const auto& f : api.functions()) functions.push_back(function_to_json(f));
    return {{"schema", kSchemaVersion}, {"version", api.version()}, {"types", types},
            {"literals", literals},     {"functions", functions}};
}

ApiSpec restore(const nlohmann::json& document) {
    try {
        if (!document.is_object() || document.value("schema", 0) != kSchemaVersion) {
            throw Error(ErrorCode::MalformedDocument, "missing or unsupported schema version");
        }
        std::vector<SemanticType> types;
        for (const auto& t : document.at("types")) types.push_back({t.get<std::string>()});
        std::vector<LiteralArg> literals;
        for (const auto& l : document.at("literals")) literals.push_back(literal_from_json(l));
        std::vector<FunctionSpec> functions;
        for (const auto& f : document.at("functions")) functions.push_back(function_from_json(f));
        return ApiSpec(document.at("version").get<std::uint64_t>(), std::move(types), std::move(functions),
                       std::move(literals));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::MalformedDocument) throw;
        throw Error(ErrorCode::MalformedDocument, std::string("invalid API document: ") + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedDocument, std::string("invalid API document: ") + e.what());
    }
}

ApiSpec restore(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedDocument, std::string("unparseable API document: ") + e.what());
    }
    return restore(doc);
}

// ---------------------------------------------------------------------------
// Seeds

namespace {

std::vector<SemanticType> base_types() {
    return {{kObjectRefType}, {kLocationType}, {kCountType}, {kNoneType}};
}

FunctionSpec primitive(std::string name, std::vector<Parameter> params, std::string doc, PrimitiveKind kind) {
    return FunctionSpec{std::move(name), std::move(params), kNoneType, std::move(doc), PrimitiveBody{kind, {}},
                        std::nullopt};
}

Pose home_pose() { return Pose{Vec3(0.36, 0.00, 0.49), Quat(1, 0, 0, 0)}; }

}  // namespace

ApiSpec gift_bag_seed_api() {
    const ParamType target{{kObjectRefType, kLocationType}};
    const ParamType object{{kObjectRefType}};
    std::vector<FunctionSpec> fns{
        primitive("go_home", {}, "Return the robot to its home pose.", PrimitiveKind::go_home),
        primitive("goto", {{"obj", target, std::nullopt}}, "Move above the specified obj.", PrimitiveKind::go_to),
        primitive("grasp", {}, "Close the gripper on whatever is below it.", PrimitiveKind::grasp),
        primitive("release", {}, "Open the gripper and let go of the held object.", PrimitiveKind::release),
    };
    fns.push_back(FunctionSpec{"pickup",
                               {{"obj", object, std::nullopt}},
                               kNoneType,
                               "Pick up the specified object.",
                               ComposedBody{{Invocation{"goto", {ParamRef{"obj"}}}, Invocation{"grasp", {}}}},
                               std::nullopt});
    std::vector<LiteralArg> lits{
        {kObjectRefType, "CANDY", Description{"A gummy, sandwich-shaped candy"}},
        {kObjectRefType, "GIFT_BAG", Description{"A paper gift bag"}},
        {kObjectRefType, "PLAY_DOH", Description{"A yellow can of Play-Doh"}},
        {kLocationType, "HOME", home_pose()},
    };
    return ApiSpec(0, base_types(), std::move(fns), std::move(lits));
}

ApiSpec stop_motion_seed_api() {
    const ParamType target{{kObjectRefType, kLocationType}};
    std::vector<FunctionSpec> fns{
        primitive("go_home", {}, "Return the camera to its home pose.", PrimitiveKind::go_home),
        primitive("goto", {{"loc", target, std::nullopt}}, "Move the camera above the specified loc.",
                  PrimitiveKind::go_to),
    };
    std::vector<LiteralArg> lits{
        {kObjectRefType, "LOKI", Description{"A LEGO Loki minifigure"}},
        {kObjectRefType, "HULK", Description{"A LEGO Hulk minifigure"}},
        {kObjectRefType, "TOWER", Description{"A LEGO tower"}},
        {kLocationType, "HOME", home_pose()},
    };
    return ApiSpec(0, base_types(), std::move(fns), std::move(lits));
}

ApiSpec seed_api(const std::string& scenario_kind) {
    if (scenario_kind == "gift_bag") return gift_bag_seed_api();
    if (scenario_kind == "stop_motion") return stop_motion_seed_api();
    throw Error(ErrorCode::InvalidArgument, "unknown seed API '" + scenario_kind + "'");
}

// ---------------------------------------------------------------------------

ApiRegistry::ApiRegistry(ApiSpec initial) : current_(std::make_shared<const ApiSpec>(std::move(initial))) {}

std::shared_ptr<const ApiSpec> ApiRegistry::current() const {
    std::lock_guard lock(mutex_);
    return current_;
}

std::shared_ptr<const ApiSpec> ApiRegistry::commit(ApiDelta& delta) {
    std::lock_guard lock(mutex_);
    auto next = std::make_shared<const ApiSpec>(apply_delta(*current_, delta));
    delta.status = DeltaStatus::committed;
    current_ = next;
    return next;
}

void ApiRegistry::rollback(ApiDelta& delta) {
    if (delta.status != DeltaStatus::pending) {
        throw Error(ErrorCode::InvalidDelta, "only pending deltas can be rolled back");
    }
    delta.status = DeltaStatus::rolled_back;
}

}  // namespace vsandbox
