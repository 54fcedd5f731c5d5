// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "vsandbox/plan.hpp"
#include "vsandbox/resolver.hpp"
#include "vsandbox/teaching.hpp"

using namespace vsandbox;
namespace vt = vsandbox::testing;

namespace {

PlanAst checked(const std::string& text, const ApiSpec& api) {
    const auto out = parse_plan_text(text, api, "u1");
    EXPECT_TRUE(std::holds_alternative<PlanOk>(out)) << text;
    return std::get<PlanOk>(out).plan;
}

ApiSpec with_pack() {
    const ApiSpec api = gift_bag_seed_api();
    FunctionSpec pack{"pack",
                      {Parameter{"obj", ParamType{{kObjectRefType}}, std::nullopt}},
                      kNoneType,
                      "Retrieve the object and place it in the gift bag.",
                      ComposedBody{{Invocation{"pickup", {ParamRef{"obj"}}},
                                    Invocation{"goto", {LiteralRef{kObjectRefType, "GIFT_BAG"}}}, Invocation{"release", {}}}},
                      1};
    return apply_delta(api, function_delta(pack, "u"));
}

const ObjectTarget kCandy{"CANDY", "A gummy, sandwich-shaped candy"};
const ObjectTarget kBag{"GIFT_BAG", "A paper gift bag"};

}  // namespace

TEST(ResolvePlan, PackExpandsToFourPrimitives) {
    const auto api = with_pack();
    const auto program = resolve_plan(checked("pack(ObjectRef.CANDY)", api), api);
    ASSERT_EQ(program.calls.size(), 4u);
    EXPECT_EQ(program.calls[0], (PrimitiveCall{PrimitiveKind::go_to, "", {kCandy}, {"pack", "pickup", "goto"}}));
    EXPECT_EQ(program.calls[1], (PrimitiveCall{PrimitiveKind::grasp, "", {}, {"pack", "pickup", "grasp"}}));
    EXPECT_EQ(program.calls[2], (PrimitiveCall{PrimitiveKind::go_to, "", {kBag}, {"pack", "goto"}}));
    EXPECT_EQ(program.calls[3], (PrimitiveCall{PrimitiveKind::release, "", {}, {"pack", "release"}}));
    EXPECT_EQ(program.api_version, 1u);
    EXPECT_EQ(program.source_utterance_id, "u1");
}

TEST(ResolvePlan, GoHomeCarriesHomePose) {
    const auto api = gift_bag_seed_api();
    const auto program = resolve_plan(checked("go_home()", api), api);
    ASSERT_EQ(program.calls.size(), 1u);
    const Pose& home = std::get<Pose>(program.calls[0].args.at(0));
    EXPECT_EQ(home.position, Vec3(0.36, 0.0, 0.49));
    EXPECT_EQ(home.orientation, Quat(1, 0, 0, 0));
}

TEST(ResolvePlan, PickupIsGotoThenGrasp) {
    const auto api = gift_bag_seed_api();
    const auto program = resolve_plan(checked("pickup(ObjectRef.CANDY)", api), api);
    ASSERT_EQ(program.calls.size(), 2u);
    EXPECT_EQ(program.calls[0].tag(), "goto");
    EXPECT_EQ(program.calls[0].args.at(0), ResolvedArg{kCandy});
    EXPECT_EQ(program.calls[1].tag(), "grasp");
}

TEST(ResolveLiteral, Values) {
    const auto api = gift_bag_seed_api();
    EXPECT_EQ(std::get<Pose>(resolve_literal(*api.find_literal("HOME"))).position, Vec3(0.36, 0.0, 0.49));
    EXPECT_EQ(resolve_literal(*api.find_literal("CANDY")), ResolvedArg{kCandy});
    EXPECT_EQ(resolve_literal(LiteralArg{kCountType, "FEW", std::int64_t{3}}), ResolvedArg{std::int64_t{3}});
}

TEST(ResolvePlan, DmpDefaultsFilled) {
    ApiSpec api = stop_motion_seed_api();
    api = apply_delta(api, function_delta(make_dmp_function("track", "track", 30, api), "u"));
    const auto program = resolve_plan(checked("track(ObjectRef.TOWER); track(ObjectRef.TOWER, 8)", api), api);
    ASSERT_EQ(program.calls.size(), 2u);
    EXPECT_EQ(program.calls[0].tag(), "dmp:track");
    EXPECT_EQ(program.calls[0].args.at(1), ResolvedArg{std::int64_t{30}});
    EXPECT_EQ(program.calls[1].args.at(1), ResolvedArg{std::int64_t{8}});
}

TEST(ResolvePlan, PrimitivePlansPassThrough) {
    const auto api = gift_bag_seed_api();
    const auto program = resolve_plan(checked("goto(ObjectRef.CANDY); grasp(); goto(Location.HOME); release()", api), api);
    ASSERT_EQ(program.calls.size(), 4u);
    for (const auto& c : program.calls) EXPECT_EQ(c.provenance.size(), 1u);
}

TEST(ResolvePlan, PlanFromNewerApiIsRejected) {
    const auto newer = with_pack();
    EXPECT_THROW(resolve_plan(checked("pack(ObjectRef.CANDY)", newer), gift_bag_seed_api()), Error);
}

TEST(ResolvePlan, MatchesStepInterpreter) {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 400; ++i) {
        const auto c = vt::random_api_case(rng);
        ASSERT_EQ(resolve_plan(c.plan, c.api), vt::interpret_plan(c.plan, c.api)) << pretty_print(c.plan);
    }
}

TEST(ResolvePlan, GeneratorReachesDepthFour) {
    std::mt19937_64 rng(1);
    std::size_t deepest = 0;
    for (int i = 0; i < 200; ++i) {
        const auto c = vt::random_api_case(rng);
        for (const auto& call : resolve_plan(c.plan, c.api).calls) deepest = std::max(deepest, call.provenance.size());
    }
    EXPECT_GE(deepest, 4u);
    EXPECT_LE(deepest, 5u);  // plan call + at most four composed levels
}

TEST(ResolvePlan, SubstitutionLocality) {
    // f(a) and f(b) differ only where the parameter flowed into a primitive.
    std::mt19937_64 rng(77);
    int checked_cases = 0;
    for (int i = 0; i < 300; ++i) {
        const auto c = vt::random_api_case(rng);
        for (const auto& fn : c.api.functions()) {
            if (fn.params.size() != 1 || fn.params[0].type != ParamType{{kObjectRefType}}) continue;
            const PlanAst pa{{Invocation{fn.name, {LiteralRef{kObjectRefType, "CANDY"}}}}, "a", c.api.version()};
            const PlanAst pb{{Invocation{fn.name, {LiteralRef{kObjectRefType, "PLAY_DOH"}}}}, "a", c.api.version()};
            const auto a = resolve_plan(pa, c.api);
            const auto b = resolve_plan(pb, c.api);
            ASSERT_EQ(a.calls.size(), b.calls.size());
            for (std::size_t k = 0; k < a.calls.size(); ++k) {
                EXPECT_EQ(a.calls[k].provenance, b.calls[k].provenance);
                EXPECT_EQ(a.calls[k].kind, b.calls[k].kind);
                if (a.calls[k].args != b.calls[k].args) {
                    // Only a call that received the argument can differ, and only in that argument.
                    bool saw_candy = false;
                    for (const auto& arg : a.calls[k].args) saw_candy |= arg == ResolvedArg{kCandy};
                    EXPECT_TRUE(saw_candy);
                }
            }
            ++checked_cases;
        }
    }
    EXPECT_GT(checked_cases, 20);
}

TEST(ProgramJson, Shape) {
    const auto api = with_pack();
    const auto j = program_to_json(resolve_plan(checked("pack(ObjectRef.CANDY)", api), api));
    EXPECT_EQ(j.at("calls").size(), 4u);
    EXPECT_EQ(j.at("calls")[0].at("tag"), "goto");
    EXPECT_EQ(j.at("calls")[0].at("args")[0].at("object"), "CANDY");
    EXPECT_EQ(j.at("calls")[2].at("provenance"), nlohmann::json({"pack", "goto"}));
}
