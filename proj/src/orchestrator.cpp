#include "evoflow/orchestrator.hpp"

#include "evoflow/error.hpp"

#include <algorithm>
#include <regex>
#include <set>
#include <sstream>

namespace evoflow {

namespace {

const std::regex& citation_group()
{
    static const std::regex re(R"(\[(\d+(?:\s*(?:,|-|–)\s*\d+)*)\])");
    return re;
}

std::string history_digest(const StepOutcome& o)
{
    return hex64(fnv1a(canonical(to_json(o))));
}

std::string describe_param(const ParamSpec& p)
{
    std::string s = p.name + " (" + std::string(to_string(p.kind));
    s += p.required ? ", required" : ", optional";
    if (p.default_value) s += ", default " + p.default_value->dump();
    if (p.allowed) {
        s += ", one of [";
        for (std::size_t i = 0; i < p.allowed->size(); ++i) s += (i ? ", " : "") + (*p.allowed)[i].dump();
        s += "]";
    }
    return s + ")";
}

const Json* field_at(const Json& artifact, const std::string& dotted)
{
    const Json* cur = &artifact;
    std::stringstream ss(dotted);
    std::string seg;
    while (std::getline(ss, seg, '.')) {
        if (!cur->is_object() || !cur->contains(seg)) return nullptr;
        cur = &(*cur)[seg];
    }
    return cur;
}

std::vector<std::string> split_words(const std::string& s)
{
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

} // namespace

std::string_view to_string(Phase phase)
{
    switch (phase) {
    case Phase::Objective: return "Objective";
    case Phase::Research: return "Research";
    case Phase::AwaitingClarification: return "AwaitingClarification";
    case Phase::Implementation: return "Implementation";
    case Phase::Summary: return "Summary";
    case Phase::Done: return "Done";
    case Phase::Failed: return "Failed";
    }
    return "?";
}

Phase parse_phase(std::string_view text)
{
    for (Phase p : {Phase::Objective, Phase::Research, Phase::AwaitingClarification, Phase::Implementation,
                    Phase::Summary, Phase::Done, Phase::Failed})
        if (to_string(p) == text) return p;
    throw Error(Errc::invalid_argument, "unknown phase '" + std::string(text) + "'");
}

bool phase_transition_allowed(Phase from, Phase to)
{
    if (from == Phase::Done || from == Phase::Failed) return false;
    if (to == Phase::Failed) return true;
    switch (from) {
    case Phase::Objective: return to == Phase::Research;
    case Phase::Research:
        return to == Phase::AwaitingClarification || to == Phase::Implementation || to == Phase::Summary;
    case Phase::AwaitingClarification: return to == Phase::Research;
    case Phase::Implementation: return to == Phase::Summary;
    case Phase::Summary: return to == Phase::Done;
    default: return false;
    }
}

Json to_json(const FinalReport& report)
{
    return Json{{"text", report.text},         {"raw_text", report.raw_text},     {"references", report.references},
                {"cited", report.cited},       {"violations", report.violations}, {"sections", report.sections},
                {"warnings", report.warnings}};
}

bool is_empty_search(const Json& output)
{
    if (!output.is_object()) return false;
    bool seen = false;
    for (const char* key : {"references", "results", "datasets"}) {
        if (!output.contains(key) || !output[key].is_array()) continue;
        seen = true;
        if (!output[key].empty()) return false;
    }
    return seen;
}

GoalStatus verify_goal(const PlanStep& step, const Json& artifact, bool success)
{
    if (!success) return GoalStatus::unmet;
    if (artifact.is_object() && artifact.contains("success") && artifact["success"] == false) return GoalStatus::unmet;
    if (!step.success_criteria || step.success_criteria->empty()) return GoalStatus::met;
    const std::string& text = *step.success_criteria;

    static const std::regex keys_re(
        R"((?:has|have|contains?|includes?|with)\s+(?:the\s+|a\s+|an\s+)?(?:keys?|fields?)\s+([A-Za-z0-9_.]+(?:\s*(?:,|and|&)\s*[A-Za-z0-9_.]+)*))",
        std::regex::icase);
    static const std::regex file_re(R"((?:file|path)\s+(?:at|in|named by)\s+(?:field\s+)?([A-Za-z0-9_.]+)\s+exists)",
                                    std::regex::icase);
    static const std::regex success_re(R"(success\s*(?:is|=|==)\s*true)", std::regex::icase);
    static const std::regex name_re(R"([A-Za-z0-9_.]+)");

    bool checked = false;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), keys_re); it != std::sregex_iterator(); ++it) {
        const std::string list = (*it)[1].str();
        for (auto n = std::sregex_iterator(list.begin(), list.end(), name_re); n != std::sregex_iterator(); ++n) {
            if (n->str() == "and") continue;
            checked = true;
            if (!field_at(artifact, n->str())) return GoalStatus::unmet;
        }
    }
    for (auto it = std::sregex_iterator(text.begin(), text.end(), file_re); it != std::sregex_iterator(); ++it) {
        checked = true;
        const Json* v = field_at(artifact, (*it)[1].str());
        if (!v || !v->is_string() || !std::filesystem::exists(v->get<std::string>())) return GoalStatus::unmet;
    }
    if (std::regex_search(text, success_re)) checked = true;
    return checked ? GoalStatus::met : GoalStatus::unchecked;
}

std::string strip_invalid_citations(std::string_view text, std::size_t n_refs, std::vector<int>* removed)
{
    const std::string s(text);
    std::string out;
    std::size_t last = 0;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), citation_group()); it != std::sregex_iterator(); ++it) {
        out += s.substr(last, static_cast<std::size_t>(it->position()) - last);
        last = static_cast<std::size_t>(it->position() + it->length());
        std::vector<int> keep;
        bool bad = false;
        for (int n : cited_indices(it->str())) {
            if (n >= 1 && static_cast<std::size_t>(n) <= n_refs) {
                keep.push_back(n);
            } else {
                bad = true;
                if (removed) removed->push_back(n);
            }
        }
        if (!bad) {
            out += it->str();
            continue;
        }
        if (keep.empty()) {
            while (!out.empty() && out.back() == ' ') out.pop_back();
            continue;
        }
        std::string g = "[";
        for (std::size_t i = 0; i < keep.size(); ++i) g += (i ? ", " : "") + std::to_string(keep[i]);
        out += g + "]";
    }
    out += s.substr(last);
    return out;
}

Session::Session(ToolRegistry& registry, ExecutorTable& executors, std::unique_ptr<ChatBackend> backend,
                 SessionConfig config, std::string objective)
    : registry_(registry), executors_(executors), backend_(std::move(backend)), config_(std::move(config)),
      objective_(std::move(objective))
{
    if (objective_.empty()) throw Error(Errc::invalid_argument, "objective must not be empty");
    if (!backend_) throw Error(Errc::invalid_argument, "session needs a chat backend");
    if (config_.deterministic)
        clock_ = std::make_unique<LogicalClock>();
    else
        clock_ = std::make_unique<WallClock>();
    session_id_ = config_.session_id.value_or(config_.deterministic ? deterministic_session_id(config_.seed, objective_)
                                                                    : random_session_id());
    record_ = std::make_unique<RunRecord>(session_id_, *clock_, config_.record_file);
}

void Session::transition(Phase to, Json detail)
{
    const Phase from = phase_.load();
    if (!phase_transition_allowed(from, to))
        throw Error(Errc::wrong_phase, std::string(to_string(from)) + " -> " + std::string(to_string(to)));
    detail["from"] = to_string(from);
    detail["to"] = to_string(to);
    record_->append(event_kind::phase_change, std::string(to_string(to)), std::move(detail));
    phase_.store(to);
}

Phase Session::run()
{
    try {
        if (!started_) {
            started_ = true;
            record_->append(event_kind::phase_change, "Objective",
                            Json{{"from", nullptr}, {"to", "Objective"}, {"objective", objective_}});
            interaction_.push_back({ChatMessage::Speaker::user, objective_});
            transition(Phase::Research);
        }
        for (;;) {
            switch (phase_.load()) {
            case Phase::Objective: transition(Phase::Research); break;
            case Phase::Research: research(); break;
            case Phase::Implementation: implementation(); break;
            case Phase::Summary: summary(); break;
            case Phase::AwaitingClarification:
            case Phase::Done:
            case Phase::Failed: return phase_.load();
            }
        }
    } catch (const Error& e) {
        failure_reason_ = e.what();
        if (phase_.load() != Phase::Failed && phase_.load() != Phase::Done)
            transition(Phase::Failed, Json{{"reason", failure_reason_}, {"code", to_string(e.code())}});
    }
    return phase_.load();
}

void Session::answer_clarification(const std::string& answer)
{
    if (phase_.load() != Phase::AwaitingClarification)
        throw Error(Errc::wrong_phase, "session is in " + std::string(to_string(phase_.load())));
    record_->append(event_kind::clarification_answer, "AwaitingClarification", Json{{"answer", answer}});
    interaction_.push_back({ChatMessage::Speaker::user, answer});
    clarification_.reset();
    transition(Phase::Research);
}

ChatExchange Session::call_role(Role role, const std::map<std::string, std::string>& bindings,
                                const std::vector<ChatMessage>& dialogue)
{
    const int turn = ++turns_[role];
    const std::string phase(to_string(phase_.load()));
    ChatExchange x;
    x.role = role;
    x.system = render_template(role, bindings);
    x.messages = dialogue;
    Json prompt = to_json(x);
    prompt.erase("response");
    prompt["turn"] = turn;
    record_->append(event_kind::prompt, phase, prompt);
    x.response = backend_->complete(role, x.system, dialogue, &x.usage);
    Json resp{{"role", to_string(role)}, {"turn", turn}, {"text", x.response}};
    if (x.usage) resp["usage"] = *x.usage;
    record_->append(event_kind::response, phase, resp);
    return x;
}

std::map<std::string, std::string> Session::common_bindings() const
{
    std::string tools;
    for (const auto& t : registry_.list()) {
        tools += "- " + t.name + " [" + std::string(to_string(t.category)) + "]: " + t.description;
        if (!t.params.empty()) {
            tools += " Params: ";
            for (std::size_t i = 0; i < t.params.size(); ++i) tools += (i ? "; " : "") + describe_param(t.params[i]);
        }
        tools += "\n";
    }
    std::string skills;
    for (const auto& s : registry_.skills()) skills += "- " + s.skill_id + ": " + s.title + "\n";
    std::string history;
    for (const auto& m : interaction_)
        history += std::string(m.speaker == ChatMessage::Speaker::user ? "user: " : "assistant: ") + m.content + "\n";
    return {{"user_objective", objective_},
            {"protein_context_summary", config_.protein_context_summary},
            {"interaction_history", history.empty() ? "(none)" : history},
            {"tools_description", tools.empty() ? "(none)" : tools},
            {"skills_metadata", skills.empty() ? "(none)" : skills}};
}

void Session::research()
{
    const ChatExchange pi = call_role(Role::PI, common_bindings(), interaction_);
    const StructuredResponse pi_out = extract_structured(Role::PI, pi.response, turns_[Role::PI]);

    if (pi_out.kind == StructuredResponse::Kind::clarification) {
        clarification_ = pi_out.parsed.clarification;
        interaction_.push_back({ChatMessage::Speaker::assistant, clarification_->question});
        record_->append(event_kind::clarification_request, "Research", to_json(*clarification_));
        transition(Phase::AwaitingClarification);
        return;
    }
    if (pi_out.kind == StructuredResponse::Kind::empty_plan) {
        plan_ = ExecutionPlan{};
        transition(Phase::Summary, Json{{"reason", "empty plan"}});
        return;
    }

    auto bindings = common_bindings();
    bindings["pi_report"] = pi.response;
    bindings["computational_biologist_step_planning"] = default_step_planning_guidance();
    const ChatExchange cb =
        call_role(Role::CB, bindings, {ChatMessage{ChatMessage::Speaker::user, "Design the execution plan."}});
    const StructuredResponse cb_out = extract_structured(Role::CB, cb.response, turns_[Role::CB]);
    if (cb_out.kind == StructuredResponse::Kind::empty_plan) {
        plan_ = ExecutionPlan{};
        transition(Phase::Summary, Json{{"reason", "empty plan"}});
        return;
    }
    if (cb_out.kind != StructuredResponse::Kind::plan)
        throw Error(Errc::plan_validation_failed, "CB did not return an execution plan");

    plan_ = prepare_plan(cb_out.parsed.plan);
    Json detail{{"plan", serialize_plan(*plan_)}};
    if (!cb_out.parsed.warnings.empty()) detail["warnings"] = cb_out.parsed.warnings;
    transition(Phase::Implementation, std::move(detail));
}

ExecutionPlan Session::prepare_plan(ExecutionPlan plan)
{
    const std::map<std::string, std::string> placeholders{{"default_output_dir", config_.output_dir.generic_string()}};
    std::map<std::string, int> pending;  // tool declared by a package step -> declaring ordinal
    for (auto& step : plan.steps) {
        step.tool_input = substitute_placeholders(step.tool_input, placeholders);
        if (step.tool_name == "package_model_tool" && step.tool_input.contains("tool_name") &&
            step.tool_input["tool_name"].is_string())
            pending.emplace(step.tool_input["tool_name"].get<std::string>(), step.step);
    }

    Json remaps = Json::array();
    for (auto& step : plan.steps) {
        const auto desc = registry_.find(step.tool_name);
        if (!desc) continue;
        for (const auto& p : desc->params) {
            if (!p.allowed || !step.tool_input.contains(p.name) || !step.tool_input[p.name].is_string()) continue;
            const Json& v = step.tool_input[p.name];
            if (std::find(p.allowed->begin(), p.allowed->end(), v) != p.allowed->end()) continue;
            std::vector<std::string> options;
            for (const auto& a : *p.allowed)
                if (a.is_string()) options.push_back(a.get<std::string>());
            if (auto mapped = map_closest_choice(v.get<std::string>(), options)) {
                remaps.push_back({{"step", step.step}, {"param", p.name}, {"from", v}, {"to", *mapped}});
                step.tool_input[p.name] = *mapped;
            }
        }
    }

    Json problems = Json::array();
    for (const auto& d : validate_against_registry(plan, registry_)) {
        if (d.code == "unknown-tool") {
            auto it = pending.find(d.tool);
            if (it != pending.end() && it->second < d.step) continue;
        }
        problems.push_back({{"step", d.step}, {"tool", d.tool}, {"param", d.param}, {"code", d.code},
                            {"message", d.message}});
    }
    if (!remaps.empty())
        record_->append(event_kind::audit, "Research", Json{{"check", "choice-mapping"}, {"remapped", remaps}});
    if (!problems.empty()) {
        record_->append(event_kind::audit, "Research", Json{{"check", "plan-validation"}, {"diagnostics", problems}});
        throw Error(Errc::plan_validation_failed, problems.front()["message"].get<std::string>());
    }
    return plan;
}

void Session::implementation()
{
    for (const auto& step : plan_->steps) {
        std::string instruction = "Run step " + std::to_string(step.step) + " with " + step.tool_name + ": " +
                                  step.task_description;
        Json payload{{"step", step.step}, {"tool_name", step.tool_name}, {"instruction", instruction},
                     {"tool_input", step.tool_input}};
        if (step.goal) payload["goal"] = *step.goal;
        if (step.success_criteria) payload["success_criteria"] = *step.success_criteria;
        record_->append(event_kind::cb_instruction, "Implementation", payload);

        StepOutcome outcome = execute_step(step);
        const bool ok = outcome.success;
        history_.append(std::move(outcome));
        Json digests = Json::array();
        for (const auto& o : history_.entries()) digests.push_back(history_digest(o));
        record_->append(event_kind::tool_result, "Implementation",
                        Json{{"step", step.step}, {"final", true}, {"outcome", to_json(history_.entries().back())},
                             {"history", digests}});
        if (!ok) {
            failure_reason_ = "step-failed: step " + std::to_string(step.step) + " (" + step.tool_name +
                              ") failed after retries";
            transition(Phase::Failed, Json{{"reason", failure_reason_}, {"code", "step-failed"}, {"step", step.step}});
            return;
        }
    }
    transition(Phase::Summary);
}

std::optional<std::pair<std::string, Json>> Session::vary_search(const std::string& tool, const Json& args,
                                                                 const Json& original, int variation) const
{
    if (variation == 1 && args.contains("query") && args["query"].is_string()) {
        auto words = split_words(args["query"].get<std::string>());
        if (words.size() >= 2) {
            std::size_t drop = 0;
            for (std::size_t i = 1; i < words.size(); ++i)
                if (words[i].size() <= words[drop].size()) drop = i;
            words.erase(words.begin() + static_cast<std::ptrdiff_t>(drop));
            std::string q;
            for (const auto& w : words) q += (q.empty() ? "" : " ") + w;
            Json next = args;
            next["query"] = q;
            return std::make_pair(tool, next);
        }
    }
    std::vector<std::string> names;
    for (const auto& t : registry_.list(ToolCategory::research_search))
        if (t.param("query")) names.push_back(t.name);
    std::sort(names.begin(), names.end());
    auto it = std::upper_bound(names.begin(), names.end(), tool);
    for (std::size_t k = 0; k < names.size(); ++k, ++it) {
        if (it == names.end()) it = names.begin();
        if (*it == tool) continue;
        Json next{{"query", original.value("query", std::string())}};
        return std::make_pair(*it, next);
    }
    return std::nullopt;
}

void Session::collect_references(const ToolDescriptor& tool, const Json& output)
{
    if (tool.category != ToolCategory::research_search || !output.is_object()) return;
    for (const char* key : {"references", "results"}) {
        if (!output.contains(key) || !output[key].is_array()) continue;
        for (const auto& r : output[key]) {
            if (!r.is_object()) continue;
            Json ref{{"title", r.value("title", "")}, {"url", r.value("url", "")}, {"source", r.value("source", "")}};
            if (r.contains("doi") && r["doi"].is_string() && !r["doi"].get<std::string>().empty()) ref["doi"] = r["doi"];
            const bool dup = std::any_of(references_.begin(), references_.end(), [&](const Json& e) {
                return ref["url"] != "" ? e["url"] == ref["url"] : e["title"] == ref["title"];
            });
            if (!dup) references_.push_back(ref);
        }
    }
}

StepOutcome Session::execute_step(const PlanStep& step)
{
    StepOutcome out;
    out.step = step.step;
    std::ostringstream trace;
    const RetryPolicy& policy = config_.retry;

    Json args;
    try {
        args = resolve_inputs(step, history_);
    } catch (const Error& e) {
        out.attempts.push_back({step.tool_input, nullptr, e.what()});
        out.trace_log = std::string("inputs unresolved: ") + e.what();
        out.goal_met = GoalStatus::unmet;
        return out;
    }

    std::string tool_name = step.tool_name;
    const Json original_args = args;
    int self_debug = 0;
    int empty_retries = 0;
    const int max_attempts = 1 + policy.max_self_debug_retries + policy.max_empty_search_retries;

    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        Json output;
        std::string error;
        Json used = args;
        const auto desc = registry_.find(tool_name);
        try {
            used = registry_.validate_invocation(tool_name, args);
        } catch (const Error& e) {
            error = e.what();
        }

        if (error.empty()) {
            const std::string key = tool_name + "\n" + canonical(used);
            auto cached = execution_memory_.find(key);
            const bool hit = cached != execution_memory_.end();
            Json inv{{"step", step.step}, {"attempt", attempt}, {"tool_name", tool_name}, {"args", used},
                     {"cache_hit", hit}};
            if (desc->category == ToolCategory::research_search && used.contains("query") && used["query"].is_string())
                if (auto w = lint_search_query(used["query"].get<std::string>())) inv["warnings"] = Json::array({*w});
            record_->append(event_kind::tool_invocation, "Implementation", inv);
            if (hit) {
                output = cached->second;
            } else {
                ExecContext ctx{tool_name, session_id_, config_.output_dir, &registry_, clock_.get()};
                try {
                    output = executors_.run(desc->executor, used, ctx);
                } catch (const Error& e) {
                    if (e.code() == Errc::fixture_exhausted) throw;
                    error = e.what();
                } catch (const std::exception& e) {
                    error = std::string("executor error: ") + e.what();
                }
            }
            if (error.empty() && output.is_object() && output.contains("success") && output["success"] == false) {
                const Json& err = output.contains("error") ? output["error"] : Json("tool reported success=false");
                error = err.is_string() ? err.get<std::string>() : err.dump();
            }
            Json result{{"step", step.step}, {"attempt", attempt}, {"tool_name", tool_name}, {"final", false},
                        {"success", error.empty()}};
            if (error.empty())
                result["output"] = output;
            else
                result["error"] = error;
            record_->append(event_kind::tool_result, "Implementation", result);
            if (error.empty() && !hit) execution_memory_[key] = output;
        } else {
            record_->append(event_kind::tool_result, "Implementation",
                            Json{{"step", step.step}, {"attempt", attempt}, {"tool_name", tool_name},
                                 {"final", false}, {"success", false}, {"rejected", true}, {"error", error}});
        }

        out.attempts.push_back({used, output, error});
        trace << "attempt " << attempt << " " << tool_name << " " << canonical(used) << " -> "
              << (error.empty() ? "ok" : error) << "\n";

        if (error.empty()) {
            if (desc->category == ToolCategory::research_search && is_empty_search(output)) {
                if (empty_retries < policy.max_empty_search_retries) {
                    if (auto next = vary_search(tool_name, args, original_args, ++empty_retries)) {
                        record_->append(event_kind::retry, "Implementation",
                                        Json{{"step", step.step}, {"attempt", attempt}, {"reason", "empty-results"},
                                             {"next_tool", next->first}, {"next_args", next->second}});
                        tool_name = next->first;
                        args = next->second;
                        continue;
                    }
                }
                trace << "empty-results after " << empty_retries << " keyword variations\n";
                out.trace_log = trace.str();
                out.goal_met = GoalStatus::unmet;
                return out;
            }
            collect_references(*desc, output);
            out.success = true;
            out.artifact = output;
            out.goal_met = verify_goal(step, output, true);
            out.trace_log = trace.str();
            return out;
        }

        if (self_debug < policy.max_self_debug_retries) {
            ++self_debug;
            Json attempts = Json::array();
            for (const auto& a : out.attempts)
                attempts.push_back({{"args", a.args}, {"error", a.error}});
            std::string available;
            for (const auto& t : registry_.list()) available += (available.empty() ? "" : ", ") + t.name;
            std::string skills;
            for (const auto& s : registry_.skills()) skills += (skills.empty() ? "" : ", ") + s.skill_id;
            PlanStep shown = step;
            shown.tool_name = tool_name;
            shown.tool_input = args;
            const std::map<std::string, std::string> bindings{
                {"available_tools_list", available},
                {"available_skills_meta", skills.empty() ? "(none)" : skills},
                {"cb_instruction", "Run step " + std::to_string(step.step) + " with " + tool_name + "."},
                {"step_json", serialize_plan(ExecutionPlan{{shown}})[0].dump(2)},
                {"attempt_log", attempts.dump(2)},
                {"machine_learning_specialist_post_step_check", default_post_step_check()}};
            const ChatExchange mls =
                call_role(Role::MLS, bindings,
                          {ChatMessage{ChatMessage::Speaker::user,
                                       "Attempt " + std::to_string(attempt) + " failed: " + error}});
            const Json reply = Json::parse(strip_code_fences(mls.response), nullptr, false);
            if (!reply.is_discarded() && reply.is_object() && reply.contains("tool_input") &&
                reply["tool_input"].is_object()) {
                record_->append(event_kind::retry, "Implementation",
                                Json{{"step", step.step}, {"attempt", attempt}, {"reason", "self-debug"},
                                     {"next_args", reply["tool_input"]}});
                args = reply["tool_input"];
                continue;
            }
            trace << "MLS stopped: " << mls.response << "\n";
        }
        if (policy.escalate_to_cb)
            record_->append(event_kind::retry, "Implementation",
                            Json{{"step", step.step}, {"attempt", attempt}, {"reason", "escalated-to-cb"},
                                 {"escalated", true}, {"error", error}});
        break;
    }
    out.trace_log = trace.str();
    out.goal_met = GoalStatus::unmet;
    return out;
}

FinalReport Session::synthesize_report()
{
    const std::string run_record = record_->ndjson();
    std::string analysis;
    for (const auto& o : history_.entries()) {
        const PlanStep* step = nullptr;
        if (plan_)
            for (const auto& s : plan_->steps)
                if (s.step == o.step) step = &s;
        analysis += "step " + std::to_string(o.step) + (step ? " " + step->tool_name : std::string()) + ": " +
                    (o.success ? "success" : "failed") + ", goal " + std::string(to_string(o.goal_met)) + "\n";
    }
    std::string refs;
    for (std::size_t i = 0; i < references_.size(); ++i) {
        const Json& r = references_[i];
        refs += "[" + std::to_string(i + 1) + "] " + r.value("title", "") + ". " + r.value("source", "") + ". " +
                r.value("url", "") + "\n";
    }
    auto bindings = common_bindings();
    bindings["full_run_record"] = run_record;
    bindings["analysis_log"] = analysis.empty() ? "(no tool steps)" : analysis;
    bindings["references"] = refs.empty() ? "(none)" : refs;
    const ChatExchange sc =
        call_role(Role::SC, bindings, {ChatMessage{ChatMessage::Speaker::user, "Write the final report."}});

    FinalReport report;
    report.raw_text = extract_structured(Role::SC, sc.response, turns_[Role::SC]).prose;
    report.references = references_;
    report.cited = cited_indices(report.raw_text);
    for (int n : report.cited)
        if (n < 1 || static_cast<std::size_t>(n) > references_.size()) report.violations.push_back(n);
    report.text = report.raw_text;

    const bool audit = config_.verification.cited_reference_ids_must_exist;
    bool passed = true;
    if (audit && !report.violations.empty()) {
        if (config_.verification.strict) {
            passed = false;
        } else {
            report.text = strip_invalid_citations(report.raw_text, references_.size());
            for (int n : report.violations)
                report.warnings.push_back("stripped citation [" + std::to_string(n) + "] with " +
                                          std::to_string(references_.size()) + " references");
        }
    }
    if (config_.verification.claims_bound_to_history) {
        static const std::regex precise(R"(\d+\.\d{3,})");
        std::set<std::string> seen;
        for (auto it = std::sregex_iterator(report.raw_text.begin(), report.raw_text.end(), precise);
             it != std::sregex_iterator(); ++it)
            if (run_record.find(it->str()) == std::string::npos && seen.insert(it->str()).second)
                report.warnings.push_back("number " + it->str() + " does not appear in the run record");
    }
    std::istringstream lines(report.text);
    for (std::string line; std::getline(lines, line);)
        if (!line.empty() && line[0] == '#') report.sections.push_back(line.substr(line.find_first_not_of("# ")));

    record_->append(event_kind::report, "Summary",
                    Json{{"text", report.text}, {"references", report.references}, {"sections", report.sections}});
    Json audit_payload{{"check", "citations"},
                       {"cited", report.cited},
                       {"violations", report.violations},
                       {"mode", !audit ? "off" : (config_.verification.strict ? "strict" : "strip")},
                       {"passed", passed},
                       {"warnings", report.warnings},
                       {"final_text", passed ? report.text : std::string()}};
    record_->append(event_kind::audit, "Summary", audit_payload);
    if (!passed)
        throw Error(Errc::citation_audit_failed,
                    "report cites [" + std::to_string(report.violations.front()) + "] with " +
                        std::to_string(references_.size()) + " references");
    return report;
}

void Session::summary()
{
    report_ = synthesize_report();
    transition(Phase::Done);
}

} // namespace evoflow
