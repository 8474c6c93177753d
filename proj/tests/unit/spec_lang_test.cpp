#include "reward_audit/corpus.hpp"
#include "reward_audit/spec_lang.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace reward_audit {
namespace {

using testing::Gen;
using testing::kPropertyCases;

template <class Fn>
ParseError expect_parse_error(Fn&& fn) {
    try {
        fn();
    } catch (const ParseError& e) {
        return e;
    }
    ADD_FAILURE() << "expected a ParseError";
    return ParseError(ErrorCode::kSyntaxError, {}, "", "none");
}

TEST(ParseSpec, SmallestDocument) {
    const RewardSpec spec = parse_spec("reward_spec tiny\nfeatures { speed = mps }\nattribute a { weight = 1 expr = speed }\n");
    EXPECT_EQ(spec.id, "tiny");
    ASSERT_EQ(spec.per_step_attributes.size(), 1u);
    EXPECT_EQ(spec.per_step_attributes[0].weight, 1.0);
    EXPECT_EQ(spec.per_step_attributes[0].expr, Expr::feature("speed"));
    EXPECT_EQ(spec.per_step_attributes[0].kind, AttributeKind::kOutcome);
    EXPECT_FALSE(spec.design_provenance.has_value());
    EXPECT_TRUE(spec.terminal_rules.empty());
}

TEST(ParseSpec, ShippedCaiCollisionRule) {
    const RewardSpec spec = parse_spec(corpus_entry("cai19").spec_text);
    const TerminalRule* rule = spec.find_terminal(EventKind::kCollision);
    ASSERT_NE(rule, nullptr);
    // 40 km/h speed reached over the 29.6 s task: 40 / 29.6 = 1.3514 m/s.
    const double v = 40.0 / 29.6;
    EXPECT_NEAR(eval_expr(rule->expr, {{"collision_speed", v}}), -2326.15, 0.005);
}

TEST(ParseSpec, FullAttributeSyntax) {
    const RewardSpec spec = parse_spec(R"(reward_spec full
source = "Somebody \"quoted\" 2020"
provenance = unstated
declared_shaping = [keep_lane]

episode {
  reward_step_s = 0.05
  decision_step_s = 0.1
  discount = 0.9
  episodic = true
  time_limit_at_kmh = 30
  termination = [goal, collision]
}

features {
  lane_offset = m
  lane_departures = count
}

attribute keep_lane {
  weight = -0.5
  expr = abs(lane_offset)
  kind = shaping
  accrual = per_decision_step
}

attribute departures {
  weight = -1
  expr = lane_departures
  tags = [law, time]
  accrual = on_event(lane_departure)
}

terminal goal {
  expr = 10
}
)");
    EXPECT_EQ(spec.source, "Somebody \"quoted\" 2020");
    EXPECT_EQ(spec.design_provenance, DesignProvenance::kUnstated);
    EXPECT_EQ(spec.declared_shaping_ids, std::set<std::string>{"keep_lane"});
    EXPECT_EQ(spec.episode.decision_ratio(), 2u);
    EXPECT_EQ(spec.episode.time_limit_at_kmh, 30.0);
    EXPECT_EQ(spec.episode.termination_criteria, (std::set<EventKind>{EventKind::kGoal, EventKind::kCollision}));
    const AttributeDef& keep = spec.per_step_attributes[0];
    EXPECT_EQ(keep.kind, AttributeKind::kShaping);
    EXPECT_EQ(keep.accrual, Accrual::per_decision_step());
    const AttributeDef& dep = spec.per_step_attributes[1];
    EXPECT_EQ(dep.accrual, Accrual::on_event(EventKind::kLaneDeparture));
    EXPECT_EQ(dep.outcome_tags, (std::set<OutcomeTag>{OutcomeTag::kLaw, OutcomeTag::kTime}));
    ASSERT_EQ(spec.features.size(), 2u);
    EXPECT_EQ(spec.features[0].name, "lane_departures");  // name-sorted
}

TEST(ParseSpec, ConstantClipWithCrossedBoundsIsRejected) {
    const ParseError e = expect_parse_error([] {
        parse_spec("reward_spec c\nfeatures { x = ratio }\nattribute a {\n  expr = clip(x, 1, 0)\n}\n");
    });
    EXPECT_EQ(e.code(), ErrorCode::kSyntaxError);
    EXPECT_EQ(e.line(), 4);
}

TEST(ParseSpec, UndeclaredFeaturePointsAtReference) {
    const ParseError e = expect_parse_error([] {
        parse_spec("reward_spec c\nfeatures { x = ratio }\nattribute a {\n  expr = x + ghost\n}\n");
    });
    EXPECT_EQ(e.code(), ErrorCode::kUnknownFeature);
    EXPECT_EQ(e.line(), 4);
    EXPECT_EQ(e.column(), 14);
}

TEST(ParseSpec, UnknownKeysAndBlocks) {
    EXPECT_EQ(expect_parse_error([] { parse_spec("reward_spec c\nepisode {\n  gamma = 0.9\n}\n"); }).code(),
              ErrorCode::kUnknownKey);
    EXPECT_EQ(expect_parse_error([] { parse_spec("reward_spec c\nrewards {\n}\n"); }).code(), ErrorCode::kUnknownKey);
    EXPECT_EQ(expect_parse_error([] { parse_spec("reward_spec c\ncolor = 3\n"); }).code(), ErrorCode::kUnknownKey);
}

TEST(ParseSpec, SyntaxErrorLocations) {
    struct Case {
        const char* text;
        int line;
        int column;
    };
    const std::vector<Case> cases{
        {"reward_spec c\nepisode {\n  discount = oops\n}\n", 3, 14},
        {"reward_spec c\nepisode {\n  discount = 0.9\n", 4, 1},
        {"reward_spec c\nepisode {\n  discount 0.9\n}\n", 3, 12},
        {"reward_spec Caps\n", 1, 13},
        {"reward_spec c\nepisode {\n  discount = 0.9x\n}\n", 3, 17},
        {"reward_spec c\nsource = \"open\n", 2, 15},
        {"reward_spec c\nfeatures { x = ratio }\nattribute a {\n  expr = x +* 2\n}\n", 4, 13},
        {"reward_spec c\nfeatures { x = ratio }\nattribute a {\n  expr = sqrt(x)\n}\n", 4, 10},
        {"reward_spec c\nfeatures { x = ratio }\nattribute a {\n  expr = abs(x, x)\n}\n", 4, 10},
        {"reward_spec c\nepisode {\n  termination = [collision, meteor]\n}\n", 3, 29},
        {"reward_spec c\nepisode {\n  discount = 0.9\n  discount = 0.8\n}\n", 4, 3},
        {"reward_spec c\nformat_version = 2\n", 2, 18},
        {"scenario s\npath_length_km = -1\n", 2, 18},
    };
    for (const auto& c : cases) {
        const std::string text = c.text;
        const ParseError e = expect_parse_error([&] {
            if (text.starts_with("scenario")) parse_scenario(text);
            else parse_spec(text);
        });
        EXPECT_EQ(e.line(), c.line) << c.text << "\n" << e.what();
        EXPECT_EQ(e.column(), c.column) << c.text << "\n" << e.what();
        EXPECT_FALSE(e.expected().empty()) << c.text;
    }
}

TEST(ParseSpec, CommentsAndCrlf) {
    const RewardSpec a = parse_spec("reward_spec c # trailing\r\n# whole line\r\nepisode {\r\n  discount = 0.5\r\n}\r\n");
    EXPECT_EQ(a.episode.discount, 0.5);
}

TEST(ParseSpec, DeepNestingIsAnErrorNotACrash) {
    std::string expr(5000, '(');
    expr += "1";
    expr += std::string(5000, ')');
    const ParseError e = expect_parse_error([&] { parse_expr(expr); });
    EXPECT_EQ(e.code(), ErrorCode::kSyntaxError);
}

TEST(RenderSpec, WeightLiteral) {
    RewardSpec spec = testing::minimal_spec();
    spec.per_step_attributes[0].weight = 0.05;
    EXPECT_NE(render_spec(spec).find("weight = 0.05\n"), std::string::npos);
}

TEST(RenderSpec, EmptyTerminalsOmitSection) {
    const RewardSpec spec = testing::minimal_spec();
    ASSERT_TRUE(spec.terminal_rules.empty());
    const std::string text = render_spec(spec);
    EXPECT_EQ(text.find("terminal"), std::string::npos);
    EXPECT_EQ(text.find('\r'), std::string::npos);
}

TEST(RenderSpec, KeysSortedWithinBlocks) {
    const std::string text = render_spec(corpus_entry("dos17").spec);
    const auto episode = text.find("episode {");
    ASSERT_NE(episode, std::string::npos);
    const auto discount = text.find("discount", episode);
    const auto reward_step = text.find("reward_step_s", episode);
    const auto termination = text.find("termination", episode);
    EXPECT_LT(discount, reward_step);
    EXPECT_LT(reward_step, termination);
}

TEST(RoundTrip, EveryCorpusDocument) {
    for (const auto& e : corpus_entries()) {
        const RewardSpec parsed = parse_spec(e.spec_text);
        const std::string rendered = render_spec(parsed);
        EXPECT_EQ(parse_spec(rendered), parsed) << e.id << "\n" << rendered;
        EXPECT_EQ(render_spec(parse_spec(rendered)), rendered) << e.id;
        if (e.scenario) {
            const std::string scn = render_scenario(*e.scenario);
            EXPECT_EQ(parse_scenario(scn), *e.scenario) << e.id << "\n" << scn;
        }
    }
}

TEST(ParseScenario, ShippedIseleScenario) {
    const ScenarioSpec scn = parse_scenario(corpus_entry("isele18").scenario_text);
    EXPECT_EQ(scn.path_length_km, 0.02);
    EXPECT_EQ(scn.success_time_s, 4.0);
}

TEST(ParseScenario, NegativePathLengthIsRejected) {
    const ParseError e = expect_parse_error([] { parse_scenario("scenario s\npath_length_km = -0.5\n"); });
    EXPECT_EQ(e.line(), 2);
    ScenarioSpec scn;
    scn.id = "s";
    scn.path_length_km = -0.5;
    EXPECT_TRUE(has_errors(validate_scenario(scn)));
}

TEST(ParseScenario, SpeedDefaultsToZero) {
    const ScenarioSpec scn = parse_scenario("scenario idle_only\ntime_limit_s = 30\n");
    EXPECT_EQ(scn.speed_mps, 0.0);
    EXPECT_TRUE(validate_scenario(scn).empty());
}

TEST(ParseScenario, KmhIsConvertedAndExclusive) {
    EXPECT_DOUBLE_EQ(parse_scenario("scenario s\nspeed_kmh = 36\n").speed_mps, 10.0);
    expect_parse_error([] { parse_scenario("scenario s\nspeed_kmh = 36\nspeed_mps = 10\n"); });
}

TEST(ParseScenario, BlocksAndEdits) {
    const ScenarioSpec scn = parse_scenario(R"(scenario s
path_length_km = 2
speed_mps = 10
idle_terminal = none
loophole_base = crash

constants {
  heading_error = 0
}

baselines {
  careful = 5000
}

event overtakes {
  per_km = 3
  before_crash = 1
}

edit circle {
  kind = insert_circle
  after_step = 4
  steps = 6
  progress_m = 5
}

edit tail {
  kind = set_feature
  feature = heading_error
  from_step = 1
  to_step = 3
  value = 2
}
)");
    EXPECT_EQ(scn.constants.at("heading_error"), 0.0);
    EXPECT_EQ(scn.baselines.at("careful"), 5000.0);
    ASSERT_NE(scn.find_event("overtakes"), nullptr);
    EXPECT_EQ(scn.find_event("overtakes")->before_crash, 1.0);
    EXPECT_EQ(scn.loophole_base, TrajectoryKind::kCrash);
    ASSERT_TRUE(scn.idle_terminal.has_value());
    EXPECT_FALSE(scn.idle_terminal->has_value());
    ASSERT_EQ(scn.loophole_edits.size(), 2u);
    EXPECT_EQ(std::get<InsertCircle>(scn.loophole_edits[0].second), (InsertCircle{4, 6, 5}));
    EXPECT_EQ(std::get<SetFeature>(scn.loophole_edits[1].second), (SetFeature{"heading_error", 1, 3, 2}));
    EXPECT_EQ(parse_scenario(render_scenario(scn)), scn);
}

TEST(ParseScenario, EditKeysAreCheckedPerKind) {
    EXPECT_EQ(expect_parse_error([] {
                  parse_scenario("scenario s\nedit e {\n  kind = inject_overlap\n  feature = x\n  seconds = 1\n}\n");
              }).code(),
              ErrorCode::kUnknownKey);
    expect_parse_error([] { parse_scenario("scenario s\nedit e {\n  kind = add_event\n}\n"); });
}

// Random specs built directly as values, so rendering is exercised on shapes no corpus file has.
TEST(RoundTripProperty, RandomSpecs) {
    Gen g(21);
    for (int i = 0; i < kPropertyCases; ++i) {
        const RewardSpec spec = testing::random_spec(g);
        const std::string text = render_spec(spec);
        RewardSpec back;
        try {
            back = parse_spec(text);
        } catch (const ParseError& e) {
            FAIL() << e.what() << "\n" << text;
        }
        ASSERT_EQ(back, spec) << text;
        ASSERT_EQ(render_spec(back), text);
    }
}

ScenarioSpec random_scenario(Gen& g) {
    ScenarioSpec scn;
    scn.id = "scn_" + std::to_string(g.integer(0, 99));
    if (g.coin(0.8)) scn.path_length_km = g.nice(0.01, 10, 3);
    if (g.coin(0.8)) scn.speed_mps = g.nice(0.5, 40, 2);
    if (g.coin(0.3)) scn.success_time_s = g.nice(1, 300, 1);
    for (const char* name : {"overtakes", "lane_changes"}) {
        if (g.coin(0.4)) {
            scn.events.push_back({name, g.nice(0, 20, 1), g.nice(0, 3, 0), g.nice(0, 2, 0)});
        }
    }
    if (g.coin(0.3)) scn.overlap_s = g.nice(0, 3, 1);
    if (g.coin(0.4)) scn.time_limit_s = g.nice(1, 300, 0);
    if (g.coin(0.3)) scn.idle_cutoff_s = g.nice(0, 20, 0);
    if (g.coin(0.3)) {
        scn.idle_terminal = g.coin() ? std::optional<EventKind>{} : std::optional<EventKind>{g.pick(all_event_kinds())};
    }
    if (g.coin(0.3)) scn.collision_damage = g.nice(0, 5, 2);
    if (g.coin(0.5)) scn.constants["desired_speed"] = g.nice(-5, 30, 1);
    if (g.coin(0.3)) scn.baselines["careful_driver"] = g.nice(1, 100000, 0);
    scn.loophole_base = static_cast<TrajectoryKind>(g.integer(0, 2));
    if (g.coin(0.5)) scn.loophole_edits.emplace_back("more", AddEvent{"overtakes", static_cast<std::size_t>(g.integer(0, 9)), g.nice(0.5, 3, 1)});
    if (g.coin(0.3)) scn.loophole_edits.emplace_back("fewer", RemoveEvent{"lane_changes", g.nice(0.5, 3, 1)});
    if (g.coin(0.3)) scn.loophole_edits.emplace_back("circle", InsertCircle{static_cast<std::size_t>(g.integer(0, 5)), 2u * g.integer(1, 4), g.nice(1, 10, 1)});
    if (g.coin(0.3)) scn.loophole_edits.emplace_back("overlap", InjectOverlap{g.nice(0.1, 2, 1)});
    return scn;
}

TEST(RoundTripProperty, RandomScenarios) {
    Gen g(22);
    for (int i = 0; i < kPropertyCases; ++i) {
        const ScenarioSpec scn = random_scenario(g);
        const std::string text = render_scenario(scn);
        ScenarioSpec back;
        try {
            back = parse_scenario(text);
        } catch (const ParseError& e) {
            FAIL() << e.what() << "\n" << text;
        }
        ASSERT_EQ(back, scn) << text;
    }
}

std::vector<std::string> lines_of(std::string_view text) {
    std::vector<std::string> lines;
    std::stringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

TEST(LocationProperty, InsertedBadTokenIsPinpointed) {
    Gen g(23);
    const auto& entries = corpus_entries();
    const std::vector<std::string> bad_tokens{"$", "Bad", "@x", "1.5e", "~"};
    for (int i = 0; i < kPropertyCases; ++i) {
        const CorpusEntry& e = entries[static_cast<std::size_t>(g.integer(0, static_cast<int>(entries.size()) - 1))];
        std::vector<std::string> lines = lines_of(e.spec_text);
        const int at = g.integer(1, static_cast<int>(lines.size()));  // after the header line
        const std::string indent(static_cast<std::size_t>(g.integer(0, 4)), ' ');
        const std::string& token = g.pick(bad_tokens);
        lines.insert(lines.begin() + at, indent + token);
        std::string text;
        for (const auto& l : lines) text += l + "\n";

        const ParseError err = expect_parse_error([&] { parse_spec(text); });
        ASSERT_EQ(err.line(), at + 1) << err.what() << "\n" << text;
        const int first = static_cast<int>(indent.size()) + 1;
        const int last = first + static_cast<int>(token.size()) - 1;
        ASSERT_GE(err.column(), first) << err.what();
        ASSERT_LE(err.column(), last + 1) << err.what();  // end-of-token errors point just past it
    }
}

TEST(FuzzProperty, ArbitraryBytesNeverCrash) {
    Gen g(24);
    const auto& entries = corpus_entries();
    int parsed = 0;
    for (int i = 0; i < 4 * kPropertyCases; ++i) {
        std::string text;
        if (g.coin(0.3)) {
            const int n = g.integer(0, 200);
            for (int k = 0; k < n; ++k) text.push_back(static_cast<char>(g.integer(0, 255)));
        } else {
            const CorpusEntry& e = entries[static_cast<std::size_t>(g.integer(0, static_cast<int>(entries.size()) - 1))];
            text = std::string(g.coin() || !e.scenario ? e.spec_text : e.scenario_text);
            const int edits = g.integer(1, 6);
            for (int k = 0; k < edits && !text.empty(); ++k) {
                const auto pos = static_cast<std::size_t>(g.integer(0, static_cast<int>(text.size()) - 1));
                switch (g.integer(0, 3)) {
                    case 0: text[pos] = static_cast<char>(g.integer(0, 255)); break;
                    case 1: text.erase(pos, static_cast<std::size_t>(g.integer(1, 20))); break;
                    case 2: text.insert(pos, 1, "{}()[]=,+-*/<>\"#\n"[g.integer(0, 16)]); break;
                    default: text.resize(pos); break;
                }
            }
        }
        try {
            if (text.starts_with("scenario")) parse_scenario(text);
            else parse_spec(text);
            ++parsed;
        } catch (const ParseError& e) {
            ASSERT_TRUE(e.line() >= 1) << e.what();
        } catch (const AuditError& e) {
            FAIL() << "non-parse error escaped: " << e.what();
        }
    }
    EXPECT_GT(parsed, 0);
}

}  // namespace
}  // namespace reward_audit
