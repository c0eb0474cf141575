#include "evoflow/error.hpp"
#include "evoflow/orchestrator.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace evoflow;
using evoflow::testing::Scenario;
using evoflow::testing::scenario_config;
using evoflow::testing::TempDir;

namespace {

template <class F>
Errc code_of(F&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an evoflow::Error";
    return Errc::io;
}

std::size_t count_kind(const std::vector<Event>& events, const std::string& kind)
{
    std::size_t n = 0;
    for (const auto& e : events) n += e.kind == kind;
    return n;
}

std::vector<std::string> phases_visited(const std::vector<Event>& events)
{
    std::vector<std::string> out;
    for (const auto& e : events)
        if (e.kind == event_kind::phase_change) out.push_back(e.payload.value("to", ""));
    return out;
}

// A session whose plan is one literature search that returns `n_refs` references
// and whose critic writes `report`.
struct CitationSession {
    ExecutorTable executors;
    std::unique_ptr<ToolRegistry> registry;
    std::unique_ptr<Session> session;

    CitationSession(const std::filesystem::path& out, int n_refs, const std::string& report, bool strict)
    {
        auto tools = std::make_shared<ToolFixtures>();
        Json refs = Json::array();
        for (int i = 1; i <= n_refs; ++i)
            refs.push_back({{"title", "Paper " + std::to_string(i)}, {"url", "https://example.org/" + std::to_string(i)}});
        tools->push("literature_search", {{"success", true}, {"references", refs}});
        bind_builtin_executors(executors, tools);
        registry = std::make_unique<ToolRegistry>(executors);
        register_builtins(*registry);

        auto backend = std::make_unique<ScriptedBackend>();
        backend->push(Role::PI, "Search the literature, then summarize.");
        backend->push(Role::CB, R"([{"step": 1, "task_description": "Search.", "tool_name": "literature_search",
                                   "tool_input": {"query": "thermostable PETase"}}])");
        backend->push(Role::SC, report);
        SessionConfig config = scenario_config(out, false);
        config.verification.strict = strict;
        session = std::make_unique<Session>(*registry, executors, std::move(backend), config, "objective");
    }
};

} // namespace

TEST(Orchestrator, PhaseAutomaton)
{
    EXPECT_TRUE(phase_transition_allowed(Phase::Objective, Phase::Research));
    EXPECT_TRUE(phase_transition_allowed(Phase::Research, Phase::AwaitingClarification));
    EXPECT_TRUE(phase_transition_allowed(Phase::AwaitingClarification, Phase::Research));
    EXPECT_TRUE(phase_transition_allowed(Phase::Research, Phase::Implementation));
    EXPECT_TRUE(phase_transition_allowed(Phase::Research, Phase::Summary));
    EXPECT_TRUE(phase_transition_allowed(Phase::Implementation, Phase::Summary));
    EXPECT_TRUE(phase_transition_allowed(Phase::Summary, Phase::Done));
    EXPECT_FALSE(phase_transition_allowed(Phase::Objective, Phase::Implementation));
    EXPECT_FALSE(phase_transition_allowed(Phase::Done, Phase::Research));
    EXPECT_FALSE(phase_transition_allowed(Phase::Summary, Phase::Implementation));
    for (Phase p : {Phase::Objective, Phase::Research, Phase::AwaitingClarification, Phase::Implementation,
                    Phase::Summary})
        EXPECT_TRUE(phase_transition_allowed(p, Phase::Failed));
    for (Phase p : {Phase::Objective, Phase::Research, Phase::AwaitingClarification, Phase::Implementation,
                    Phase::Summary, Phase::Done, Phase::Failed})
        EXPECT_EQ(parse_phase(to_string(p)), p);
}

TEST(Orchestrator, EmptyPlanGoesStraightToSummary)
{
    TempDir dir("orch");
    Scenario s("empty", "What is a protein language model?", scenario_config(dir.path()));
    EXPECT_EQ(s.session->run(), Phase::Done);
    const auto events = s.session->record().events();
    EXPECT_EQ(count_kind(events, event_kind::tool_invocation), 0u);
    EXPECT_EQ(phases_visited(events), (std::vector<std::string>{"Objective", "Research", "Summary", "Done"}));
    ASSERT_TRUE(s.session->report());
    EXPECT_NE(s.session->report()->text.find("protein language model"), std::string::npos);
}

TEST(Orchestrator, ClarificationRoundTrip)
{
    TempDir dir("orch");
    Scenario s("clarify", "Predict a property of P04040.", scenario_config(dir.path()));
    EXPECT_EQ(s.session->run(), Phase::AwaitingClarification);
    ASSERT_TRUE(s.session->pending_clarification());
    EXPECT_NE(s.session->pending_clarification()->question.find("solubility"), std::string::npos);
    EXPECT_EQ(count_kind(s.session->record().events(), event_kind::tool_invocation), 0u);

    s.session->answer_clarification("Solubility, please.");
    EXPECT_EQ(s.session->phase(), Phase::Research);
    EXPECT_EQ(s.session->run(), Phase::Done);
    const auto events = s.session->record().events();
    EXPECT_EQ(count_kind(events, event_kind::clarification_request), 1u);
    EXPECT_EQ(count_kind(events, event_kind::clarification_answer), 1u);
    EXPECT_TRUE(audit_run_record(events).empty());
    EXPECT_EQ(code_of([&] { s.session->answer_clarification("again"); }), Errc::wrong_phase);
}

TEST(Orchestrator, AnswerOutsideClarificationIsWrongPhase)
{
    TempDir dir("orch");
    Scenario s("empty", "q", scenario_config(dir.path()));
    EXPECT_EQ(code_of([&] { s.session->answer_clarification("x"); }), Errc::wrong_phase);
}

TEST(Orchestrator, VerifyGoal)
{
    PlanStep step;
    step.success_criteria = "Output has the key references.";
    EXPECT_EQ(verify_goal(step, {{"success", true}, {"references", Json::array()}}, true), GoalStatus::met);
    EXPECT_EQ(verify_goal(step, {{"success", true}}, true), GoalStatus::unmet);
    EXPECT_EQ(verify_goal(step, {{"success", false}, {"references", Json::array()}}, true), GoalStatus::unmet);
    EXPECT_EQ(verify_goal(step, Json(), false), GoalStatus::unmet);

    step.success_criteria = "The structure looks plausible to a biologist.";
    EXPECT_EQ(verify_goal(step, {{"success", true}}, true), GoalStatus::unchecked);

    step.success_criteria = "Output contains fields details.train_path and details.test_path.";
    EXPECT_EQ(verify_goal(step, {{"details", {{"train_path", "a"}, {"test_path", "b"}}}}, true), GoalStatus::met);
    EXPECT_EQ(verify_goal(step, {{"details", {{"train_path", "a"}}}}, true), GoalStatus::unmet);
}

TEST(Orchestrator, VerifyGoalFileExists)
{
    TempDir dir("orch");
    const auto f = dir / "model.pt";
    std::ofstream(f) << "x";
    PlanStep step;
    step.success_criteria = "The file at checkpoint exists.";
    EXPECT_EQ(verify_goal(step, {{"checkpoint", f.string()}}, true), GoalStatus::met);
    EXPECT_EQ(verify_goal(step, {{"checkpoint", (dir / "nope").string()}}, true), GoalStatus::unmet);
}

TEST(Orchestrator, EmptySearchDetection)
{
    EXPECT_TRUE(is_empty_search({{"references", Json::array()}}));
    EXPECT_FALSE(is_empty_search({{"references", {1}}}));
    EXPECT_FALSE(is_empty_search({{"success", true}}));
}

TEST(Orchestrator, StripInvalidCitations)
{
    std::vector<int> removed;
    EXPECT_EQ(strip_invalid_citations("A [1], B [5].", 2, &removed), "A [1], B.");
    EXPECT_EQ(removed, std::vector<int>{5});
    EXPECT_EQ(strip_invalid_citations("C [1, 7].", 2), "C [1].");
}

TEST(Orchestrator, CitationsWithinReferencesPass)
{
    TempDir dir("orch");
    CitationSession c(dir.path(), 2, "Finding one [1] and finding two [2].", false);
    EXPECT_EQ(c.session->run(), Phase::Done);
    ASSERT_TRUE(c.session->report());
    EXPECT_TRUE(c.session->report()->violations.empty());
    EXPECT_EQ(c.session->report()->cited, (std::vector<int>{1, 2}));
    EXPECT_EQ(c.session->references().size(), 2u);
    EXPECT_TRUE(audit_run_record(c.session->record().events()).empty());
}

TEST(Orchestrator, OutOfRangeCitationIsStripped)
{
    TempDir dir("orch");
    CitationSession c(dir.path(), 2, "Finding [1] and an invented one [5].", false);
    EXPECT_EQ(c.session->run(), Phase::Done);
    const auto& report = *c.session->report();
    EXPECT_EQ(report.violations, std::vector<int>{5});
    EXPECT_EQ(report.text.find("[5]"), std::string::npos);
    EXPECT_NE(report.raw_text.find("[5]"), std::string::npos);
    EXPECT_FALSE(report.warnings.empty());
    EXPECT_TRUE(audit_run_record(c.session->record().events()).empty());
}

TEST(Orchestrator, StrictCitationModeFails)
{
    TempDir dir("orch");
    CitationSession c(dir.path(), 2, "Finding [5].", true);
    EXPECT_EQ(c.session->run(), Phase::Failed);
    EXPECT_NE(c.session->failure_reason().find("citation-audit-failed"), std::string::npos)
        << c.session->failure_reason();
}

TEST(Orchestrator, AllergenCaseStudyPackagesATool)
{
    TempDir dir("orch");
    Scenario s("cs1", "Build an allergenicity predictor.", scenario_config(dir.path()));
    EXPECT_EQ(s.session->run(), Phase::Done);
    ASSERT_TRUE(s.registry->find("predict_allergenicity"));
    EXPECT_EQ(s.registry->get("predict_allergenicity").category, ToolCategory::automl);
    const StepOutcome* last = s.session->history().find(7);
    ASSERT_NE(last, nullptr);
    EXPECT_NEAR(last->artifact.at("preview")[0].at("class_1_prob").get<double>(), 0.6881815, 1e-6);
    for (const auto& o : s.session->history().entries()) EXPECT_EQ(o.goal_met, GoalStatus::met) << o.step;
    EXPECT_TRUE(audit_run_record(s.session->record().events()).empty());
}

TEST(Orchestrator, ToolsRunOnlyAfterCbInstruction)
{
    TempDir dir("orch");
    Scenario s("cs3", "Find thermostable PETase candidates.", scenario_config(dir.path()));
    EXPECT_EQ(s.session->run(), Phase::Done);
    std::set<int> instructed;
    for (const auto& e : s.session->record().events()) {
        if (e.kind == event_kind::cb_instruction) instructed.insert(e.payload.at("step").get<int>());
        if (e.kind == event_kind::tool_invocation) EXPECT_TRUE(instructed.count(e.payload.at("step").get<int>()));
    }
}

TEST(Orchestrator, ScreeningCaseStudyRanksCandidates)
{
    TempDir dir("orch");
    Scenario s("cs3", "Find thermostable PETase candidates.", scenario_config(dir.path()));
    ASSERT_EQ(s.session->run(), Phase::Done);
    const auto& entries = s.session->history().entries();
    const Json& ranked = entries.back().artifact;
    EXPECT_TRUE(ranked.value("success", false)) << ranked.dump();
    ASSERT_TRUE(s.session->report());
    EXPECT_EQ(s.session->report()->violations, std::vector<int>{12});
}

TEST(Orchestrator, RetriesRecoverEmptySearchAndBadInputs)
{
    TempDir dir("orch");
    Scenario s("retry", "Predict localization of P04040.", scenario_config(dir.path()));
    EXPECT_EQ(s.session->run(), Phase::Done);
    const auto events = s.session->record().events();
    EXPECT_GE(count_kind(events, event_kind::retry), 2u);
    EXPECT_TRUE(audit_run_record(events).empty());
    for (const auto& o : s.session->history().entries()) EXPECT_TRUE(o.success) << o.step;
}

TEST(Orchestrator, ExhaustedRetriesFailTheSession)
{
    TempDir dir("orch");
    Scenario s("stepfail", "Download 9ZZZ.", scenario_config(dir.path()));
    EXPECT_EQ(s.session->run(), Phase::Failed);
    EXPECT_FALSE(s.session->failure_reason().empty());
    const auto events = s.session->record().events();
    EXPECT_EQ(count_kind(events, event_kind::tool_invocation), 3u);
    EXPECT_TRUE(audit_run_record(events).empty());
}

TEST(Orchestrator, RecordFileMatchesInMemoryRecord)
{
    TempDir dir("orch");
    Scenario s("cs2", "Improve the VHH.", scenario_config(dir.path()));
    EXPECT_EQ(s.session->run(), Phase::Done);
    EXPECT_EQ(read_text_file(dir / "run_record.ndjson"), s.session->record().ndjson());
}

TEST(Orchestrator, ReplayIsByteIdentical)
{
    TempDir dir("orch");
    auto once = [&] {
        std::filesystem::remove_all(dir / "outputs");
        Scenario s("cs2", "Improve the VHH.", scenario_config(dir.path(), false));
        s.session->run();
        return s.session->record().ndjson();
    };
    const std::string a = once();
    EXPECT_EQ(a, once());
}

TEST(Orchestrator, HistoryOnlyGrows)
{
    TempDir dir("orch");
    Scenario s("cs1", "Build an allergenicity predictor.", scenario_config(dir.path()));
    s.session->run();
    std::size_t last = 0;
    for (const auto& e : s.session->record().events()) {
        if (e.kind != event_kind::tool_result || !e.payload.value("final", false)) continue;
        const std::size_t n = e.payload.at("history").size();
        EXPECT_GT(n, last);
        last = n;
    }
    EXPECT_EQ(last, s.session->history().size());
}
