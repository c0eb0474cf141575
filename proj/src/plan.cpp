#include "evoflow/plan.hpp"

#include "evoflow/error.hpp"
#include "evoflow/tool_registry.hpp"

#include <set>

namespace evoflow {

namespace {

constexpr std::string_view kDepPrefix = "dependency:step_";

void collect_into(const Json& value, std::vector<DependencyRef>& out)
{
    if (value.is_string()) {
        auto parsed = parse_dependency_string(value.get_ref<const std::string&>());
        if (auto* ref = std::get_if<DependencyRef>(&parsed)) out.push_back(*ref);
    } else if (value.is_structured()) {
        for (const auto& child : value) collect_into(child, out);
    }
}

std::string path_text(const DependencyRef& ref, std::size_t upto)
{
    std::string out = "step_" + std::to_string(ref.target_step);
    for (std::size_t i = 0; i < upto && i < ref.field_path.size(); ++i) out += ":" + ref.field_path[i];
    return out;
}

Json resolve_value(const Json& value, const ExecutionHistory& history)
{
    if (value.is_string()) {
        auto parsed = parse_dependency_string(value.get_ref<const std::string&>());
        auto* ref = std::get_if<DependencyRef>(&parsed);
        if (!ref) return value;
        const StepOutcome* outcome = history.find(ref->target_step);
        if (!outcome || !outcome->success)
            throw Error(Errc::unresolved_dependency,
                        "step " + std::to_string(ref->target_step) + " has no successful outcome");
        const Json* node = &outcome->artifact;
        for (std::size_t i = 0; i < ref->field_path.size(); ++i) {
            const auto& seg = ref->field_path[i];
            if (!node->is_object() || !node->contains(seg))
                throw Error(Errc::missing_field, "'" + path_text(*ref, i + 1) + "' is absent in the step output");
            node = &(*node)[seg];
        }
        return *node;
    }
    if (value.is_array()) {
        Json out = Json::array();
        for (const auto& e : value) out.push_back(resolve_value(e, history));
        return out;
    }
    if (value.is_object()) {
        Json out = Json::object();
        for (const auto& [k, v] : value.items()) out[k] = resolve_value(v, history);
        return out;
    }
    return value;
}

PlanStep step_from_json(const Json& j, std::size_t index)
{
    const std::string where = "plan step #" + std::to_string(index + 1);
    if (!j.is_object()) throw Error(Errc::schema_violation, where + " is not an object");
    for (const char* key : {"step", "tool_name", "tool_input"})
        if (!j.contains(key)) throw Error(Errc::schema_violation, where + " lacks '" + key + "'");
    PlanStep s;
    const Json& ordinal = j["step"];
    if (!ordinal.is_number_integer() || ordinal.get<long long>() < 1)
        throw Error(Errc::schema_violation, where + ": 'step' must be a positive integer");
    s.step = ordinal.get<int>();
    if (!j["tool_name"].is_string() || j["tool_name"].get<std::string>().empty())
        throw Error(Errc::schema_violation, where + ": 'tool_name' must be a non-empty string");
    s.tool_name = j["tool_name"].get<std::string>();
    if (!j["tool_input"].is_object()) throw Error(Errc::schema_violation, where + ": 'tool_input' must be an object");
    s.tool_input = j["tool_input"];
    auto text_field = [&](const char* key) -> std::optional<std::string> {
        if (!j.contains(key) || j[key].is_null()) return std::nullopt;
        if (!j[key].is_string()) throw Error(Errc::schema_violation, where + ": '" + key + "' must be a string");
        return j[key].get<std::string>();
    };
    s.task_description = text_field("task_description").value_or("");
    s.goal = text_field("goal");
    s.success_criteria = text_field("success_criteria");
    static const std::set<std::string> known{"step", "goal", "success_criteria", "task_description", "tool_name",
                                             "tool_input"};
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) s.extras[k] = v;
    return s;
}

} // namespace

std::string to_string(const DependencyRef& ref)
{
    std::string out = "dependency:step_" + std::to_string(ref.target_step);
    for (const auto& seg : ref.field_path) out += ":" + seg;
    return out;
}

std::variant<DependencyRef, std::string> parse_dependency_string(std::string_view s)
{
    if (s.substr(0, kDepPrefix.size()) != kDepPrefix) return std::string(s);
    std::string_view rest = s.substr(kDepPrefix.size());
    auto colon = rest.find(':');
    std::string_view digits = rest.substr(0, colon);
    if (digits.empty() || digits.size() > 9 ||
        digits.find_first_not_of("0123456789") != std::string_view::npos)
        throw Error(Errc::malformed_ordinal, "'" + std::string(s) + "': step ordinal is not a positive integer");
    DependencyRef ref;
    ref.target_step = std::stoi(std::string(digits));
    if (ref.target_step < 1)
        throw Error(Errc::malformed_ordinal, "'" + std::string(s) + "': step ordinal is not a positive integer");
    if (colon != std::string_view::npos) {
        std::string_view path = rest.substr(colon + 1);
        while (true) {
            auto next = path.find(':');
            std::string_view seg = path.substr(0, next);
            if (seg.empty())
                throw Error(Errc::malformed_ordinal, "'" + std::string(s) + "': empty field path segment");
            ref.field_path.emplace_back(seg);
            if (next == std::string_view::npos) break;
            path = path.substr(next + 1);
        }
    }
    return ref;
}

std::vector<DependencyRef> collect_dependencies(const Json& value)
{
    std::vector<DependencyRef> out;
    collect_into(value, out);
    return out;
}

ExecutionPlan plan_from_json(const Json& array, std::vector<std::string>* warnings)
{
    (void)warnings;
    if (!array.is_array()) throw Error(Errc::schema_violation, "a plan must be a JSON array");
    ExecutionPlan plan;
    for (std::size_t i = 0; i < array.size(); ++i) {
        PlanStep s = step_from_json(array[i], i);
        if (s.step != static_cast<int>(i) + 1)
            throw Error(Errc::schema_violation, "step ordinals must run 1..N in order; found " +
                                                    std::to_string(s.step) + " at position " + std::to_string(i + 1));
        for (const auto& ref : collect_dependencies(s.tool_input))
            if (ref.target_step >= s.step)
                throw Error(Errc::forward_dependency, "step " + std::to_string(s.step) + " references " +
                                                          to_string(ref) + " which does not precede it");
        plan.steps.push_back(std::move(s));
    }
    return plan;
}

ParsedPlan parse_plan(std::string_view raw)
{
    const std::string body = strip_code_fences(raw);

    // Tracks key sets per open object so duplicate tool_input keys can be reported.
    std::vector<std::set<std::string>> open;
    std::vector<std::string> warnings;
    auto callback = [&](int depth, Json::parse_event_t event, Json& parsed) {
        (void)depth;
        switch (event) {
        case Json::parse_event_t::object_start: open.emplace_back(); break;
        case Json::parse_event_t::object_end:
            if (!open.empty()) open.pop_back();
            break;
        case Json::parse_event_t::key: {
            auto key = parsed.get<std::string>();
            if (!open.empty() && !open.back().insert(key).second)
                warnings.push_back("duplicate key '" + key + "'; the last value wins");
            break;
        }
        default: break;
        }
        return true;
    };
    Json j;
    try {
        j = Json::parse(body, callback);
    } catch (const Json::parse_error& e) {
        throw Error(Errc::malformed_json, e.what());
    }

    ParsedPlan out;
    out.warnings = std::move(warnings);
    if (j.is_object()) {
        if (!j.value("need_clarification", false))
            throw Error(Errc::schema_violation, "object response without need_clarification=true");
        if (!j.contains("question") || !j["question"].is_string() || j["question"].get<std::string>().empty())
            throw Error(Errc::schema_violation, "clarification lacks a non-empty 'question'");
        out.kind = ParsedPlan::Kind::clarification;
        out.clarification.question = j["question"].get<std::string>();
        if (j.contains("preliminary_plan")) {
            const Json& p = j["preliminary_plan"];
            out.clarification.preliminary_plan = p.is_string() ? p.get<std::string>() : p.dump();
        }
        return out;
    }
    if (!j.is_array()) throw Error(Errc::schema_violation, "expected a JSON array or a clarification object");
    out.plan = plan_from_json(j);
    out.kind = out.plan.empty() ? ParsedPlan::Kind::empty : ParsedPlan::Kind::plan;
    return out;
}

Json serialize_plan(const ExecutionPlan& plan)
{
    Json out = Json::array();
    for (const auto& s : plan.steps) {
        Json j = s.extras.is_object() ? s.extras : Json::object();
        j["step"] = s.step;
        if (s.goal) j["goal"] = *s.goal;
        if (s.success_criteria) j["success_criteria"] = *s.success_criteria;
        j["task_description"] = s.task_description;
        j["tool_name"] = s.tool_name;
        j["tool_input"] = s.tool_input;
        out.push_back(std::move(j));
    }
    return out;
}

Json to_json(const ClarificationRequest& request)
{
    return Json{{"need_clarification", true},
                {"preliminary_plan", request.preliminary_plan},
                {"question", request.question}};
}

Json substitute_placeholders(const Json& value, const std::map<std::string, std::string>& values)
{
    if (value.is_string()) {
        std::string s = value.get<std::string>();
        for (const auto& [name, replacement] : values) {
            const std::string token = "<" + name + ">";
            for (auto pos = s.find(token); pos != std::string::npos; pos = s.find(token, pos + replacement.size()))
                s.replace(pos, token.size(), replacement);
        }
        return s;
    }
    if (value.is_array()) {
        Json out = Json::array();
        for (const auto& e : value) out.push_back(substitute_placeholders(e, values));
        return out;
    }
    if (value.is_object()) {
        Json out = Json::object();
        for (const auto& [k, v] : value.items()) out[k] = substitute_placeholders(v, values);
        return out;
    }
    return value;
}

std::string_view to_string(GoalStatus status)
{
    switch (status) {
    case GoalStatus::met: return "met";
    case GoalStatus::unmet: return "unmet";
    case GoalStatus::unchecked: return "unchecked";
    }
    return "unchecked";
}

Json to_json(const StepOutcome& o)
{
    Json attempts = Json::array();
    for (const auto& a : o.attempts) {
        Json j{{"args", a.args}, {"output", a.output}};
        if (!a.error.empty()) j["error"] = a.error;
        attempts.push_back(std::move(j));
    }
    return Json{{"step", o.step},       {"artifact", o.artifact}, {"trace_log", o.trace_log},
                {"success", o.success}, {"attempts", attempts},   {"goal_met", to_string(o.goal_met)}};
}

const StepOutcome* ExecutionHistory::find(int step) const
{
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
        if (it->step == step) return &*it;
    return nullptr;
}

Json resolve_inputs(const PlanStep& step, const ExecutionHistory& history)
{
    return resolve_value(step.tool_input, history);
}

std::vector<PlanDiagnostic> validate_against_registry(const ExecutionPlan& plan, const ToolRegistry& registry)
{
    std::vector<PlanDiagnostic> out;
    for (const auto& s : plan.steps) {
        std::set<std::string> deferred;
        if (s.tool_input.is_object())
            for (const auto& [k, v] : s.tool_input.items())
                if (!collect_dependencies(v).empty()) deferred.insert(k);
        for (auto& d : registry.check_invocation(s.tool_name, s.tool_input, deferred))
            out.push_back({s.step, d.tool, d.param, d.code, d.message});
    }
    return out;
}

} // namespace evoflow
