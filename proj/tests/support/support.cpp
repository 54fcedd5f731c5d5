// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "vsandbox/plan.hpp"
#include "vsandbox/teaching.hpp"

#ifndef VSANDBOX_SCENARIO_DIR
#error "VSANDBOX_SCENARIO_DIR must be defined"
#endif

namespace vsandbox::testing {

std::filesystem::path scenario_dir() { return VSANDBOX_SCENARIO_DIR; }

Scenario bundled_scenario(const std::string& name) { return load_scenario(scenario_dir() / (name + ".json")); }

std::vector<std::string> bundled_scenario_names() {
    std::vector<std::string> names;
    for (const auto& entry : std::filesystem::directory_iterator(scenario_dir())) {
        if (entry.path().extension() == ".json") names.push_back(entry.path().stem().string());
    }
    std::sort(names.begin(), names.end());
    return names;
}

// ---- synthetic demonstrations ---------------------------------------------

std::string shape_name(DemoShape shape) {
    switch (shape) {
        case DemoShape::line: return "line";
        case DemoShape::arc: return "arc";
        case DemoShape::s_curve: return "s_curve";
    }
    return "?";
}

namespace {

Vec3 shape_point(DemoShape shape, double s) {
    constexpr double kPi = 3.14159265358979323846;
    switch (shape) {
        case DemoShape::line:
            return Vec3(0.30, -0.20, 0.20) + s * Vec3(0.30, 0.25, 0.10);
        case DemoShape::arc: {
            // Quarter circle in the table plane with a rising height.
            const double a = 0.5 * kPi * s;
            return Vec3(0.50 - 0.20 * std::cos(a), 0.20 * std::sin(a), 0.20 + 0.08 * s);
        }
        case DemoShape::s_curve:
            return Vec3(0.30 + 0.30 * s, -0.10 + 0.20 * s + 0.05 * std::sin(2 * kPi * s), 0.25 - 0.05 * s);
    }
    return Vec3::Zero();
}

}  // namespace

std::vector<dmp::Waypoint> synthetic_demo(DemoShape shape, std::size_t count, double duration) {
    std::vector<dmp::Waypoint> out;
    for (std::size_t i = 0; i < count; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(count - 1);
        const double s = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);  // minimum jerk
        out.push_back({u * duration, Pose{shape_point(shape, s), Quat::Identity()}});
    }
    return out;
}

// ---- DMP oracles ----------------------------------------------------------

std::array<std::vector<double>, 3> dense_lwr_weights(const dmp::Demonstration& demo, const dmp::DmpParams& basis) {
    const auto K = static_cast<Eigen::Index>(demo.resampled.size());
    const double T = demo.resampled.back().t - demo.resampled.front().t;
    const double h = T / static_cast<double>(K - 1);

    // Difference operators: central inside, second-order one-sided at the ends.
    Eigen::MatrixXd D1 = Eigen::MatrixXd::Zero(K, K);
    Eigen::MatrixXd D2 = Eigen::MatrixXd::Zero(K, K);
    for (Eigen::Index i = 1; i + 1 < K; ++i) {
        D1(i, i - 1) = -0.5 / h;
        D1(i, i + 1) = 0.5 / h;
        D2(i, i - 1) = 1.0 / (h * h);
        D2(i, i) = -2.0 / (h * h);
        D2(i, i + 1) = 1.0 / (h * h);
    }
    D1.row(0).head(3) << -1.5 / h, 2.0 / h, -0.5 / h;
    D1.row(K - 1).tail(3) << 0.5 / h, -2.0 / h, 1.5 / h;
    D2.row(0).head(4) << 2.0, -5.0, 4.0, -1.0;
    D2.row(0) /= h * h;
    D2.row(K - 1).tail(4) << -1.0, 4.0, -5.0, 2.0;
    D2.row(K - 1) /= h * h;

    Eigen::VectorXd x(K);
    for (Eigen::Index i = 0; i < K; ++i) x(i) = std::exp(-basis.alpha_x * demo.resampled[static_cast<std::size_t>(i)].t / T);

    std::array<std::vector<double>, 3> out;
    for (int d = 0; d < 3; ++d) {
        Eigen::VectorXd y(K);
        for (Eigen::Index i = 0; i < K; ++i) y(i) = demo.resampled[static_cast<std::size_t>(i)].pose.position[d];
        const double y0 = y(0);
        const double g = y(K - 1);
        out[d].assign(basis.basis_count, 0.0);
        if (std::abs(g - y0) < 1e-6) continue;
        const Eigen::VectorXd yd = D1 * y;
        const Eigen::VectorXd ydd = D2 * y;
        const Eigen::VectorXd f =
            T * T * ydd - basis.alpha_y * (basis.gamma_y * (Eigen::VectorXd::Constant(K, g) - y) - T * yd);
        const Eigen::VectorXd s = x * (g - y0);
        for (std::size_t j = 0; j < basis.basis_count; ++j) {
            const Eigen::VectorXd psi = (-basis.widths[j] * (x.array() - basis.centers[j]).square()).exp().matrix();
            const Eigen::VectorXd sw = psi.array().sqrt().matrix();
            const Eigen::MatrixXd A = (sw.array() * s.array()).matrix();
            const Eigen::VectorXd b = (sw.array() * f.array()).matrix();
            out[d][j] = A.colPivHouseholderQr().solve(b)(0);
        }
    }
    return out;
}

std::vector<Vec3> fine_step_rollout(const dmp::DmpParams& params, const dmp::RolloutConfig& config, double h) {
    const double tau = static_cast<double>(config.steps) * config.dt;
    const Vec3 span = config.goal - config.start;
    auto forcing = [&](int d, double x) {
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < params.basis_count; ++j) {
            const double psi = std::exp(-params.widths[j] * (x - params.centers[j]) * (x - params.centers[j]));
            num += psi * params.weights[d][j];
            den += psi;
        }
        return num / den * x * span[d];
    };
    // State per axis: (y, v) with v = dy/dt.
    auto deriv = [&](double t, const Eigen::Matrix<double, 6, 1>& s) {
        Eigen::Matrix<double, 6, 1> ds;
        const double x = std::exp(-params.alpha_x * t / tau);
        for (int d = 0; d < 3; ++d) {
            const double y = s(d), v = s(3 + d);
            ds(d) = v;
            ds(3 + d) = (params.alpha_y * (params.gamma_y * (config.goal[d] - y) - tau * v) + forcing(d, x)) / (tau * tau);
        }
        return ds;
    };
    Eigen::Matrix<double, 6, 1> s;
    s << config.start, Vec3::Zero();
    std::vector<Vec3> out;
    double t = 0.0;
    for (std::size_t frame = 1; frame <= config.steps; ++frame) {
        const double t_end = static_cast<double>(frame) * config.dt;
        while (t < t_end - 1e-12) {
            const double step = std::min(h, t_end - t);
            const auto k1 = deriv(t, s);
            const auto k2 = deriv(t + step / 2, s + step / 2 * k1);
            const auto k3 = deriv(t + step / 2, s + step / 2 * k2);
            const auto k4 = deriv(t + step, s + step * k3);
            s += step / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
            t += step;
        }
        out.push_back(s.head<3>());
    }
    return out;
}

double rmse(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]).squaredNorm();
    return std::sqrt(sum / static_cast<double>(a.size()));
}

double max_deviation(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, (a[i] - b[i]).norm());
    return m;
}

// ---- random APIs ------------------------------------------------------------

namespace {

const ParamType kObj{{kObjectRefType}};
const ParamType kLoc{{kLocationType}};
const ParamType kTarget{{kObjectRefType, kLocationType}};
const ParamType kCount{{kCountType}};

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

bool coin(std::mt19937_64& rng, double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; }

Argument literal_for(std::mt19937_64& rng, const ParamType& type, const ApiSpec& api) {
    const std::string& t = pick(rng, type.alternatives);
    if (t == kCountType) return IntegerArg{std::uniform_int_distribution<std::int64_t>(2, 120)(rng)};
    const auto lits = api.literals_of(t);
    const LiteralArg* lit = pick(rng, lits);
    return LiteralRef{lit->type, lit->canonical_name};
}

}  // namespace

RandomApiCase random_api_case(std::mt19937_64& rng, const RandomApiOptions& options) {
    ApiSpec api = gift_bag_seed_api();
    auto add = [&](ApiDelta delta) { api = apply_delta(api, delta); };

    for (int i = 0; i < 3; ++i) {
        const Pose p{Vec3(0.2 + 0.1 * i, -0.3 + 0.2 * i, 0.1), Quat::Identity()};
        add({AddLiteral{{kLocationType, fmt::format("SPOT_{}", i), p}}, "gen", DeltaStatus::pending});
        add({AddLiteral{{kObjectRefType, fmt::format("THING_{}", i), Description{fmt::format("thing {}", i)}}}, "gen",
             DeltaStatus::pending});
    }
    for (int i = 0; i < 2; ++i) {
        FunctionSpec fn{fmt::format("skill_{}", i),
                        {Parameter{"target", kTarget, std::nullopt}, Parameter{"frames", kCount, IntegerArg{30 + i}}},
                        kNoneType,
                        "Perform a taught motion.",
                        PrimitiveBody{PrimitiveKind::dmp, fmt::format("skill_{}", i)},
                        api.version() + 1};
        add(function_delta(std::move(fn), "gen"));
    }

    std::map<std::string, int> depth{{"go_home", 0}, {"goto", 0}, {"grasp", 0}, {"release", 0},
                                     {"pickup", 1}, {"skill_0", 0}, {"skill_1", 0}};
    const std::vector<ParamType> param_types{kObj, kLoc, kTarget, kCount};
    for (int n = 0; n < options.functions; ++n) {
        std::vector<const FunctionSpec*> callees;
        for (const auto& f : api.functions()) {
            if (depth.at(f.name) < options.max_depth) callees.push_back(&f);
        }
        FunctionSpec fn;
        fn.name = fmt::format("fn_{}", n);
        fn.docstring = "Generated.";
        fn.taught_at = api.version() + 1;
        const int nparams = std::uniform_int_distribution<int>(0, 2)(rng);
        for (int p = 0; p < nparams; ++p) fn.params.push_back({fmt::format("p{}", p), pick(rng, param_types), std::nullopt});

        ComposedBody body;
        int d = 0;
        const int steps = std::uniform_int_distribution<int>(1, options.max_fanout)(rng);
        for (int s = 0; s < steps; ++s) {
            const FunctionSpec& callee = *pick(rng, callees);
            d = std::max(d, depth.at(callee.name) + 1);
            Invocation call{callee.name, {}};
            for (std::size_t i = 0; i < callee.params.size(); ++i) {
                const Parameter& cp = callee.params[i];
                if (cp.default_value && coin(rng, 0.5)) break;  // trailing defaults may be omitted
                std::vector<std::string> usable;
                for (const auto& own : fn.params) {
                    if (own.type.subset_of(cp.type)) usable.push_back(own.name);
                }
                if (!usable.empty() && coin(rng, 0.7)) {
                    call.args.push_back(ParamRef{pick(rng, usable)});
                } else {
                    call.args.push_back(literal_for(rng, cp.type, api));
                }
            }
            body.steps.push_back(std::move(call));
        }
        fn.body = std::move(body);
        depth[fn.name] = d;
        add(function_delta(std::move(fn), "gen"));
    }

    PlanAst plan;
    plan.source_utterance_id = "gen";
    const int calls = std::uniform_int_distribution<int>(1, options.plan_length)(rng);
    for (int c = 0; c < calls; ++c) {
        const FunctionSpec& fn = pick(rng, api.functions());
        Invocation call{fn.name, {}};
        for (const auto& p : fn.params) {
            if (p.default_value && coin(rng, 0.5)) break;
            call.args.push_back(literal_for(rng, p.type, api));
        }
        plan.invocations.push_back(std::move(call));
    }
    plan = type_check(std::move(plan), api);
    return {std::move(api), std::move(plan)};
}

// ---- step interpreter ---------------------------------------------------------

ResolvedProgram interpret_plan(const PlanAst& plan, const ApiSpec& api) {
    struct Frame {
        const FunctionSpec* fn;
        std::map<std::string, Argument> env;  // concrete arguments only
        std::size_t next_step = 0;
    };
    auto ground = [&](const Argument& a) -> ResolvedArg {
        if (const auto* i = std::get_if<IntegerArg>(&a)) return i->value;
        const LiteralArg& lit = *api.find_literal(std::get<LiteralRef>(a).name);
        if (const auto* d = std::get_if<Description>(&lit.value)) return ObjectTarget{lit.canonical_name, d->text};
        if (const auto* p = std::get_if<Pose>(&lit.value)) return *p;
        return std::get<std::int64_t>(lit.value);
    };
    auto bind = [&](const Invocation& call, const std::map<std::string, Argument>& caller) {
        Frame f{api.find_function(call.function), {}, 0};
        for (std::size_t i = 0; i < f.fn->params.size(); ++i) {
            Argument a = i < call.args.size() ? call.args[i] : *f.fn->params[i].default_value;
            if (const auto* ref = std::get_if<ParamRef>(&a)) a = caller.at(ref->name);
            f.env[f.fn->params[i].name] = a;
        }
        return f;
    };

    ResolvedProgram out{{}, plan.source_utterance_id, api.version()};
    for (const auto& top : plan.invocations) {
        std::vector<Frame> stack{bind(top, {})};
        while (!stack.empty()) {
            Frame& frame = stack.back();
            if (const auto* prim = std::get_if<PrimitiveBody>(&frame.fn->body)) {
                PrimitiveCall call{prim->kind, prim->skill_id, {}, {}};
                for (const auto& f : stack) call.provenance.push_back(f.fn->name);
                for (const auto& p : frame.fn->params) call.args.push_back(ground(frame.env.at(p.name)));
                if (prim->kind == PrimitiveKind::go_home && call.args.empty()) {
                    call.args.push_back(ground(LiteralRef{kLocationType, "HOME"}));
                }
                out.calls.push_back(std::move(call));
                stack.pop_back();
                continue;
            }
            const auto& steps = std::get<ComposedBody>(frame.fn->body).steps;
            if (frame.next_step == steps.size()) {
                stack.pop_back();
                continue;
            }
            const Invocation& step = steps[frame.next_step++];
            Frame child = bind(step, frame.env);
            stack.push_back(std::move(child));  // invalidates `frame`
        }
    }
    return out;
}

}  // namespace vsandbox::testing
