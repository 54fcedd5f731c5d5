// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "vsandbox/error.hpp"
#include "vsandbox/plan.hpp"

using namespace vsandbox;

namespace {

ErrorCode check_error(const std::string& text, const ApiSpec& api) {
    const auto syntax = parse_invocations(text, false);
    EXPECT_FALSE(syntax.error) << text;
    try {
        type_check(PlanAst{syntax.invocations, "u", std::nullopt}, api);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "type_check accepted " << text;
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(ParsePlanText, CandyPlanIsOk) {
    const auto api = gift_bag_seed_api();
    const auto out = parse_plan_text("pickup(ObjectRef.CANDY); goto(ObjectRef.GIFT_BAG); release()", api, "u1");
    ASSERT_TRUE(std::holds_alternative<PlanOk>(out)) << outcome_to_json(out).dump();
    const auto& plan = std::get<PlanOk>(out).plan;
    EXPECT_EQ(plan.invocations.size(), 3u);
    EXPECT_EQ(plan.api_version, 0u);
    EXPECT_EQ(plan.source_utterance_id, "u1");
}

TEST(ParsePlanText, UnknownLiteralTeachesArgument) {
    const auto out = parse_plan_text("pickup(ObjectRef.GREEN_TOY_CAR)", gift_bag_seed_api());
    ASSERT_TRUE(std::holds_alternative<TeachArgument>(out));
    EXPECT_EQ(std::get<TeachArgument>(out), (TeachArgument{"pickup", 0, SemanticType{kObjectRefType}, "green toy car"}));
}

TEST(ParsePlanText, UnknownFunctionTeachesFunction) {
    const auto out = parse_plan_text("pack(ObjectRef.CANDY)", gift_bag_seed_api());
    ASSERT_TRUE(std::holds_alternative<TeachFunction>(out));
    EXPECT_EQ(std::get<TeachFunction>(out).surface_verb, "pack");
    EXPECT_EQ(std::get<TeachFunction>(out).message, "I am not sure how to pack; could you teach me?");
}

TEST(ParsePlanText, ArgumentGapWinsOverFunctionGap) {
    const auto api = gift_bag_seed_api();
    for (const char* text : {"pack(ObjectRef.CANDY); pickup(ObjectRef.TOY_CAR)", "pickup(ObjectRef.TOY_CAR); pack(ObjectRef.CANDY)"}) {
        EXPECT_TRUE(std::holds_alternative<TeachArgument>(parse_plan_text(text, api))) << text;
    }
}

TEST(ParsePlanText, LeftmostUnknownLiteralIsReported) {
    const auto out = parse_plan_text("pickup(ObjectRef.TOY_CAR); goto(ObjectRef.RED_BOX)", gift_bag_seed_api());
    ASSERT_TRUE(std::holds_alternative<TeachArgument>(out));
    EXPECT_EQ(std::get<TeachArgument>(out).surface_text, "toy car");
}

TEST(ParsePlanText, MalformedInputs) {
    const auto api = gift_bag_seed_api();
    for (const char* text : {"", "pickup(", "pickup(ObjectRef.CANDY", "goto(obj)", "goto(42)", "pickup()", "release(1)", "go_home();;"}) {
        EXPECT_TRUE(std::holds_alternative<Malformed>(parse_plan_text(text, api))) << text;
    }
    // Names are case-sensitive: a miss is a teaching opportunity, not a syntax error.
    EXPECT_TRUE(std::holds_alternative<TeachFunction>(parse_plan_text("Pickup()", api)));
    EXPECT_TRUE(std::holds_alternative<TeachArgument>(parse_plan_text("pickup(ObjectRef.candy)", api)));
}

TEST(ParsePlanText, TrailingSemicolonAndWhitespaceAccepted) {
    const auto out = parse_plan_text("  go_home() ;\n grasp();", gift_bag_seed_api());
    ASSERT_TRUE(std::holds_alternative<PlanOk>(out));
    EXPECT_EQ(std::get<PlanOk>(out).plan.invocations.size(), 2u);
}

TEST(TypeCheck, Examples) {
    const auto api = gift_bag_seed_api();
    const auto ok = parse_invocations("goto(Location.HOME)", false);
    EXPECT_EQ(type_check(PlanAst{ok.invocations, "u", std::nullopt}, api).api_version, 0u);
    EXPECT_EQ(check_error("goto(42)", api), ErrorCode::TypeMismatch);
    EXPECT_EQ(check_error("pickup()", api), ErrorCode::ArityMismatch);
    EXPECT_EQ(check_error("pickup(Location.HOME)", api), ErrorCode::TypeMismatch);
    EXPECT_EQ(check_error("fly()", api), ErrorCode::UnknownFunction);
    EXPECT_EQ(check_error("pickup(ObjectRef.NOPE)", api), ErrorCode::UnknownLiteral);
    // Literals are looked up within their written type.
    EXPECT_EQ(check_error("goto(Location.CANDY)", api), ErrorCode::UnknownLiteral);
}

TEST(TypeCheck, MessagesNameTheMismatch) {
    try {
        type_check(PlanAst{parse_invocations("goto(42)", false).invocations, "u", std::nullopt}, gift_bag_seed_api());
        FAIL();
    } catch (const Error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("obj"), std::string::npos) << msg;
        EXPECT_NE(msg.find("ObjectRef|Location"), std::string::npos) << msg;
        EXPECT_NE(msg.find("Count"), std::string::npos) << msg;
    }
}

TEST(ParseInvocations, ParamRefsOnlyInBodies) {
    EXPECT_TRUE(parse_invocations("pickup(obj)", false).error);
    const auto body = parse_invocations("pickup(obj); goto(ObjectRef.GIFT_BAG); release()", true);
    ASSERT_FALSE(body.error);
    EXPECT_EQ(body.invocations[0].args[0], Argument{ParamRef{"obj"}});
}

TEST(PrettyPrint, Examples) {
    const auto api = gift_bag_seed_api();
    const std::string candy = "pickup(ObjectRef.CANDY); goto(ObjectRef.GIFT_BAG); release()";
    EXPECT_EQ(pretty_print(std::get<PlanOk>(parse_plan_text(candy, api)).plan), candy);
    EXPECT_EQ(pretty_print(std::get<PlanOk>(parse_plan_text("go_home()", api)).plan), "go_home()");
}

TEST(PrettyPrint, RoundTripOverGeneratedPlans) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 300; ++i) {
        const auto c = vsandbox::testing::random_api_case(rng);
        const auto text = pretty_print(c.plan);
        const auto out = parse_plan_text(text, c.api, c.plan.source_utterance_id);
        ASSERT_TRUE(std::holds_alternative<PlanOk>(out)) << text;
        EXPECT_EQ(std::get<PlanOk>(out).plan, c.plan) << text;
    }
}

TEST(ParsePlanText, TotalOnRandomText) {
    // Every byte string maps to exactly one outcome and nothing escapes.
    std::mt19937_64 rng(17);
    const auto api = gift_bag_seed_api();
    const std::string alphabet = "abcdefgoprtuhkisnmxyzOBJECTREFLocation._;(), 0123456789-\n\t\"'\\{}[]";
    const std::vector<std::string> pieces{"pickup(", "goto(", "ObjectRef.", "CANDY", "Location.HOME", ")", ";", ","};
    for (int i = 0; i < 5000; ++i) {
        std::string text;
        const int len = std::uniform_int_distribution<int>(0, 40)(rng);
        for (int k = 0; k < len; ++k) {
            if (rng() % 3 == 0) {
                text += pieces[rng() % pieces.size()];
            } else {
                text += alphabet[rng() % alphabet.size()];
            }
        }
        ParseOutcome out;
        ASSERT_NO_THROW(out = parse_plan_text(text, api)) << text;
        EXPECT_FALSE(outcome_kind(out).empty());
    }
}

TEST(ParseOutcome, JsonRoundTrip) {
    const auto api = gift_bag_seed_api();
    for (const char* text : {"pickup(ObjectRef.CANDY)", "pickup(ObjectRef.TOY_CAR)", "pack(ObjectRef.CANDY)", "pickup("}) {
        const auto out = parse_plan_text(text, api, "u9");
        EXPECT_EQ(outcome_from_json(outcome_to_json(out)), out) << text;
    }
}

TEST(Surface, CanonicalNames) {
    EXPECT_EQ(surface_from_canonical("GREEN_TOY_CAR"), "green toy car");
    EXPECT_EQ(clarification_message("pack"), "I am not sure how to pack; could you teach me?");
}
