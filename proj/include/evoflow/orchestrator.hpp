#pragma once

#include "evoflow/agent.hpp"
#include "evoflow/executors.hpp"
#include "evoflow/plan.hpp"
#include "evoflow/run_record.hpp"
#include "evoflow/tool_registry.hpp"

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace evoflow {

enum class Phase { Objective, Research, AwaitingClarification, Implementation, Summary, Done, Failed };

std::string_view to_string(Phase phase);
Phase parse_phase(std::string_view text);
// Allowed automaton edges; any phase may move to Failed.
bool phase_transition_allowed(Phase from, Phase to);

struct VerificationConstraints {
    bool cited_reference_ids_must_exist = true;
    bool claims_bound_to_history = true;
    // Strict mode fails the session on a bad citation instead of stripping it.
    bool strict = false;
};

struct SessionConfig {
    std::filesystem::path output_dir = "evoflow_outputs";  // value of <default_output_dir>
    std::optional<std::filesystem::path> record_file;       // NDJSON run record
    RetryPolicy retry;
    VerificationConstraints verification;
    std::uint64_t seed = 0;
    // Logical clock and seed-derived session id, so replays are byte-identical.
    bool deterministic = true;
    std::optional<std::string> session_id;
    std::string protein_context_summary = "(none)";
};

struct FinalReport {
    std::string text;             // after the citation audit
    std::string raw_text;         // as the critic wrote it
    std::vector<Json> references; // [n] indexes references[n-1]
    std::vector<int> cited;
    std::vector<int> violations;
    std::vector<std::string> sections;
    std::vector<std::string> warnings;
};

// One research session: Objective -> Research -> (AwaitingClarification ->
// Research)* -> Implementation -> Summary -> Done, or Failed from anywhere.
// Not thread-safe except phase() and the run record, which other threads may read.
class Session {
public:
    Session(ToolRegistry& registry, ExecutorTable& executors, std::unique_ptr<ChatBackend> backend,
            SessionConfig config, std::string objective);

    // Advances until Done, Failed, or AwaitingClarification.
    Phase run();
    // Throws wrong-phase unless the session awaits clarification.
    void answer_clarification(const std::string& answer);

    Phase phase() const { return phase_.load(); }
    const std::string& session_id() const { return session_id_; }
    const std::string& objective() const { return objective_; }
    RunRecord& record() { return *record_; }
    const RunRecord& record() const { return *record_; }
    const ExecutionHistory& history() const { return history_; }
    const std::optional<ExecutionPlan>& plan() const { return plan_; }
    const std::optional<FinalReport>& report() const { return report_; }
    const std::optional<ClarificationRequest>& pending_clarification() const { return clarification_; }
    const std::vector<Json>& references() const { return references_; }
    const std::string& failure_reason() const { return failure_reason_; }
    const std::vector<ChatMessage>& interaction_memory() const { return interaction_; }

    // Exposed for tests; run() calls these in order.
    StepOutcome execute_step(const PlanStep& step);
    FinalReport synthesize_report();

private:
    void transition(Phase to, Json detail = Json::object());
    void research();
    void implementation();
    void summary();
    ChatExchange call_role(Role role, const std::map<std::string, std::string>& bindings,
                           const std::vector<ChatMessage>& dialogue);
    std::map<std::string, std::string> common_bindings() const;
    ExecutionPlan prepare_plan(ExecutionPlan plan);
    void collect_references(const ToolDescriptor& tool, const Json& output);
    std::optional<std::pair<std::string, Json>> vary_search(const std::string& tool, const Json& args,
                                                           const Json& original, int variation) const;

    ToolRegistry& registry_;
    ExecutorTable& executors_;
    std::unique_ptr<ChatBackend> backend_;
    SessionConfig config_;
    std::string objective_;
    std::unique_ptr<Clock> clock_;
    std::string session_id_;
    std::unique_ptr<RunRecord> record_;
    std::atomic<Phase> phase_{Phase::Objective};
    bool started_ = false;
    std::map<Role, int> turns_;
    std::vector<ChatMessage> interaction_;
    std::map<std::string, Json> execution_memory_;  // tool + canonical args -> artifact
    std::optional<ExecutionPlan> plan_;
    ExecutionHistory history_;
    std::vector<Json> references_;
    std::optional<ClarificationRequest> clarification_;
    std::optional<FinalReport> report_;
    std::string failure_reason_;
};

Json to_json(const FinalReport& report);

// Deterministic goal check: success flag, named output fields, named files.
// Criteria with no mechanically checkable clause give unchecked.
GoalStatus verify_goal(const PlanStep& step, const Json& artifact, bool success);

// True when a search result lists nothing under references/results/datasets.
bool is_empty_search(const Json& output);

// Citation audit helper: drops cited indices outside 1..n_refs.
std::string strip_invalid_citations(std::string_view text, std::size_t n_refs, std::vector<int>* removed = nullptr);

} // namespace evoflow
