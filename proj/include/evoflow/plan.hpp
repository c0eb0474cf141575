#pragma once

#include "evoflow/json.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace evoflow {

class ToolRegistry;

struct DependencyRef {
    int target_step = 1;
    std::vector<std::string> field_path;

    bool operator==(const DependencyRef&) const = default;
};

std::string to_string(const DependencyRef& ref);

// Parses `dependency:step_<N>[:a:b...]`. Strings without the `dependency:step_`
// prefix come back unchanged as literals. Throws malformed-ordinal.
std::variant<DependencyRef, std::string> parse_dependency_string(std::string_view s);

// All dependency references appearing in string leaves of a value.
std::vector<DependencyRef> collect_dependencies(const Json& value);

struct PlanStep {
    int step = 1;
    std::optional<std::string> goal;
    std::optional<std::string> success_criteria;
    std::string task_description;
    std::string tool_name;
    Json tool_input = Json::object();  // values are literals or dependency strings
    Json extras = Json::object();      // unrecognized keys, kept for round-trip

    bool operator==(const PlanStep&) const = default;
};

struct ExecutionPlan {
    std::vector<PlanStep> steps;

    bool empty() const { return steps.empty(); }
    bool operator==(const ExecutionPlan&) const = default;
};

struct ClarificationRequest {
    std::string preliminary_plan;
    std::string question;

    bool operator==(const ClarificationRequest&) const = default;
};

struct ParsedPlan {
    enum class Kind { plan, clarification, empty };
    Kind kind = Kind::empty;
    ExecutionPlan plan;
    ClarificationRequest clarification;
    std::vector<std::string> warnings;  // e.g. duplicate tool_input keys
};

// Accepts an optionally fenced JSON array (plan or []) or a clarification object.
// Throws malformed-json, schema-violation, forward-dependency, malformed-ordinal.
ParsedPlan parse_plan(std::string_view raw);
ExecutionPlan plan_from_json(const Json& array, std::vector<std::string>* warnings = nullptr);

Json serialize_plan(const ExecutionPlan& plan);
Json to_json(const ClarificationRequest& request);

// Replaces `<name>` tokens inside string leaves. Unknown tokens stay literal.
Json substitute_placeholders(const Json& value, const std::map<std::string, std::string>& values);

enum class GoalStatus { met, unmet, unchecked };
std::string_view to_string(GoalStatus status);

struct Attempt {
    Json args;
    Json output;
    std::string error;

    bool operator==(const Attempt&) const = default;
};

struct StepOutcome {
    int step = 1;
    Json artifact;  // null when the step failed
    std::string trace_log;
    bool success = false;
    std::vector<Attempt> attempts;
    GoalStatus goal_met = GoalStatus::unchecked;

    bool operator==(const StepOutcome&) const = default;
};

Json to_json(const StepOutcome& outcome);

// Append-only record of step outcomes.
class ExecutionHistory {
public:
    void append(StepOutcome outcome) { entries_.push_back(std::move(outcome)); }
    const std::vector<StepOutcome>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    // Latest outcome recorded for an ordinal, if any.
    const StepOutcome* find(int step) const;

private:
    std::vector<StepOutcome> entries_;
};

// Replaces every dependency string in the step's tool_input by the referenced
// output. Throws unresolved-dependency or missing-field.
Json resolve_inputs(const PlanStep& step, const ExecutionHistory& history);

struct PlanDiagnostic {
    int step = 0;
    std::string tool;
    std::string param;
    std::string code;
    std::string message;
};

// Registry check for every step; parameters carrying dependency refs are deferred.
std::vector<PlanDiagnostic> validate_against_registry(const ExecutionPlan& plan, const ToolRegistry& registry);

} // namespace evoflow
