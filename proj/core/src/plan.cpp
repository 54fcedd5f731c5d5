// SPDX-License-Identifier: Apache-2.0
#include "vsandbox/plan.hpp"

#include <cctype>
#include <charconv>

#include <fmt/format.h>

#include "vsandbox/error.hpp"

namespace vsandbox {
namespace {

enum class Tok { ident, integer, lparen, rparen, comma, semicolon, dot, end, bad };

struct Token {
    Tok kind = Tok::end;
    std::string_view text;
    std::size_t offset = 0;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        if (pos_ >= src_.size()) return {Tok::end, {}, pos_};
        const std::size_t start = pos_;
        const char c = src_[pos_];
        auto single = [&](Tok k) {
            ++pos_;
            return Token{k, src_.substr(start, 1), start};
        };
        switch (c) {
            case '(': return single(Tok::lparen);
            case ')': return single(Tok::rparen);
            case ',': return single(Tok::comma);
            case ';': return single(Tok::semicolon);
            case '.': return single(Tok::dot);
            default: break;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
                ++pos_;
            }
            return {Tok::ident, src_.substr(start, pos_ - start), start};
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '-') {
            ++pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            auto text = src_.substr(start, pos_ - start);
            if (text == "-") return {Tok::bad, text, start};
            return {Tok::integer, text, start};
        }
        ++pos_;
        return {Tok::bad, src_.substr(start, 1), start};
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;
};

class Parser {
public:
    Parser(std::string_view src, bool allow_params) : lexer_(src), allow_params_(allow_params) {
        advance();
    }

    SyntaxResult run() {
        SyntaxResult result;
        try {
            while (tok_.kind != Tok::end) {
                result.invocations.push_back(call());
                if (tok_.kind == Tok::semicolon) {
                    advance();
                    continue;
                }
                if (tok_.kind != Tok::end) fail("expected ';' between calls");
            }
            if (result.invocations.empty()) fail("empty plan");
        } catch (const std::string& msg) {
            result.invocations.clear();
            result.error = msg;
        }
        return result;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        std::string near = tok_.kind == Tok::end ? "end of input" : fmt::format("'{}'", tok_.text);
        throw fmt::format("{} at offset {} (near {})", what, tok_.offset, near);
    }

    void advance() { tok_ = lexer_.next(); }

    void expect(Tok kind, const char* what) {
        if (tok_.kind != kind) fail(fmt::format("expected {}", what));
        advance();
    }

    Invocation call() {
        if (tok_.kind != Tok::ident) fail("expected function name");
        Invocation inv;
        inv.function = std::string(tok_.text);
        advance();
        expect(Tok::lparen, "'('");
        if (tok_.kind != Tok::rparen) {
            inv.args.push_back(argument());
            while (tok_.kind == Tok::comma) {
                advance();
                inv.args.push_back(argument());
            }
        }
        expect(Tok::rparen, "')'");
        return inv;
    }

    Argument argument() {
        if (tok_.kind == Tok::integer) {
            std::int64_t value = 0;
            auto [ptr, ec] = std::from_chars(tok_.text.data(), tok_.text.data() + tok_.text.size(), value);
            if (ec != std::errc() || ptr != tok_.text.data() + tok_.text.size()) fail("integer out of range");
            advance();
            return IntegerArg{value};
        }
        if (tok_.kind != Tok::ident) fail("expected argument");
        std::string first(tok_.text);
        advance();
        if (tok_.kind == Tok::dot) {
            advance();
            if (tok_.kind != Tok::ident) fail("expected literal name after '.'");
            LiteralRef ref{first, std::string(tok_.text)};
            advance();
            return ref;
        }
        if (!allow_params_) fail(fmt::format("bare name '{}' is not a literal (write Type.NAME)", first));
        return ParamRef{first};
    }

    Lexer lexer_;
    bool allow_params_;
    Token tok_;
};

}  // namespace

std::string outcome_kind(const ParseOutcome& outcome) {
    struct {
        std::string operator()(const PlanOk&) const { return "Ok"; }
        std::string operator()(const TeachArgument&) const { return "TeachArgument"; }
        std::string operator()(const TeachFunction&) const { return "TeachFunction"; }
        std::string operator()(const Malformed&) const { return "Malformed"; }
    } visitor;
    return std::visit(visitor, outcome);
}

nlohmann::json outcome_to_json(const ParseOutcome& outcome) {
    nlohmann::json j{{"kind", outcome_kind(outcome)}};
    if (const auto* ok = std::get_if<PlanOk>(&outcome)) {
        j["plan"] = pretty_print(ok->plan);
        j["utterance_id"] = ok->plan.source_utterance_id;
        if (ok->plan.api_version) j["api_version"] = *ok->plan.api_version;
    } else if (const auto* ta = std::get_if<TeachArgument>(&outcome)) {
        j["function"] = ta->function_name;
        j["param_index"] = ta->param_index;
        j["inferred_type"] = ta->inferred_type.name;
        j["surface_text"] = ta->surface_text;
    } else if (const auto* tf = std::get_if<TeachFunction>(&outcome)) {
        j["verb"] = tf->surface_verb;
        j["message"] = tf->message;
    } else {
        j["reason"] = std::get<Malformed>(outcome).reason;
    }
    return j;
}

ParseOutcome outcome_from_json(const nlohmann::json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "Ok") {
        auto syntax = parse_invocations(j.at("plan").get<std::string>(), false);
        if (syntax.error) throw Error(ErrorCode::MalformedDocument, *syntax.error);
        PlanAst ast{std::move(syntax.invocations), j.value("utterance_id", std::string{}), std::nullopt};
        if (j.contains("api_version")) ast.api_version = j.at("api_version").get<std::uint64_t>();
        return PlanOk{std::move(ast)};
    }
    if (kind == "TeachArgument") {
        return TeachArgument{j.at("function").get<std::string>(), j.at("param_index").get<std::size_t>(),
                             SemanticType{j.at("inferred_type").get<std::string>()},
                             j.at("surface_text").get<std::string>()};
    }
    if (kind == "TeachFunction") {
        return TeachFunction{j.at("verb").get<std::string>(), j.at("message").get<std::string>()};
    }
    if (kind == "Malformed") return Malformed{j.at("reason").get<std::string>()};
    throw Error(ErrorCode::MalformedDocument, "unknown outcome kind: " + kind);
}

SyntaxResult parse_invocations(std::string_view text, bool allow_param_refs) {
    return Parser(text, allow_param_refs).run();
}

void check_invocation(const Invocation& call, const ApiSpec& api, const FunctionSpec* enclosing) {
    const FunctionSpec* fn = api.find_function(call.function);
    if (fn == nullptr) throw Error(ErrorCode::UnknownFunction, fmt::format("UnknownFunction({})", call.function));
    const std::size_t required = fn->required_arity();
    if (call.args.size() < required || call.args.size() > fn->params.size()) {
        const std::string expected = required == fn->params.size()
                                         ? std::to_string(required)
                                         : fmt::format("{}..{}", required, fn->params.size());
        throw Error(ErrorCode::ArityMismatch, fmt::format("ArityMismatch({}: expected {}, found {})", call.function,
                                                          expected, call.args.size()));
    }
    for (std::size_t i = 0; i < call.args.size(); ++i) {
        const Parameter& param = fn->params[i];
        const Argument& arg = call.args[i];
        auto mismatch = [&](const std::string& found) {
            return Error(ErrorCode::TypeMismatch,
                         fmt::format("TypeMismatch({}, {}, {})", param.name, param.type.to_string(), found));
        };
        if (const auto* ref = std::get_if<LiteralRef>(&arg)) {
            const LiteralArg* lit = api.find_literal(ref->name);
            if (lit == nullptr || lit->type != ref->type) {
                throw Error(ErrorCode::UnknownLiteral, fmt::format("UnknownLiteral({}.{})", ref->type, ref->name));
            }
            if (!param.type.accepts(lit->type)) throw mismatch(lit->type);
        } else if (std::holds_alternative<IntegerArg>(arg)) {
            if (!param.type.accepts(kCountType)) throw mismatch(kCountType);
        } else {
            const auto& pref = std::get<ParamRef>(arg);
            const Parameter* bound = enclosing != nullptr ? enclosing->find_param(pref.name) : nullptr;
            if (bound == nullptr) {
                throw Error(ErrorCode::UnboundParameter, fmt::format("UnboundParameter({})", pref.name));
            }
            if (!bound->type.subset_of(param.type)) throw mismatch(bound->type.to_string());
        }
    }
}

PlanAst type_check(PlanAst ast, const ApiSpec& api) {
    for (const auto& call : ast.invocations) check_invocation(call, api, nullptr);
    ast.api_version = api.version();
    return ast;
}

std::string surface_from_canonical(std::string_view canonical_name) {
    std::string out;
    out.reserve(canonical_name.size());
    for (char c : canonical_name) {
        out.push_back(c == '_' ? ' ' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

std::string clarification_message(std::string_view verb) {
    return fmt::format("I am not sure how to {}; could you teach me?", verb);
}

ParseOutcome parse_plan_text(std::string_view text, const ApiSpec& api, std::string utterance_id) {
    auto syntax = parse_invocations(text, false);
    if (syntax.error) return Malformed{*syntax.error};

    std::optional<std::string> unknown_function;
    for (const auto& call : syntax.invocations) {
        const FunctionSpec* fn = api.find_function(call.function);
        if (fn == nullptr) {
            if (!unknown_function) unknown_function = call.function;
            continue;
        }
        const std::size_t n = std::min(call.args.size(), fn->params.size());
        for (std::size_t i = 0; i < n; ++i) {
            const auto* ref = std::get_if<LiteralRef>(&call.args[i]);
            if (ref == nullptr || api.find_literal(ref->name) != nullptr) continue;
            const ParamType& declared = fn->params[i].type;
            const std::string inferred = declared.accepts(ref->type) ? ref->type : declared.alternatives.front();
            return TeachArgument{call.function, i, SemanticType{inferred}, surface_from_canonical(ref->name)};
        }
    }
    if (unknown_function) {
        return TeachFunction{*unknown_function, clarification_message(surface_from_canonical(*unknown_function))};
    }
    try {
        PlanAst ast{std::move(syntax.invocations), std::move(utterance_id), std::nullopt};
        return PlanOk{type_check(std::move(ast), api)};
    } catch (const Error& e) {
        return Malformed{e.what()};
    }
}

std::string format_argument(const Argument& arg) {
    if (const auto* ref = std::get_if<LiteralRef>(&arg)) return ref->type + "." + ref->name;
    if (const auto* i = std::get_if<IntegerArg>(&arg)) return std::to_string(i->value);
    return std::get<ParamRef>(arg).name;
}

std::string format_invocation(const Invocation& call) {
    std::string out = call.function + "(";
    for (std::size_t i = 0; i < call.args.size(); ++i) {
        if (i > 0) out += ", ";
        out += format_argument(call.args[i]);
    }
    return out + ")";
}

std::string format_invocations(const std::vector<Invocation>& calls) {
    std::string out;
    for (std::size_t i = 0; i < calls.size(); ++i) {
        if (i > 0) out += "; ";
        out += format_invocation(calls[i]);
    }
    return out;
}

std::string pretty_print(const PlanAst& ast) { return format_invocations(ast.invocations); }

}  // namespace vsandbox
