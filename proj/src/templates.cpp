#include "evoflow/agent.hpp"
#include "evoflow/error.hpp"

#include <cctype>

namespace evoflow {

namespace {

constexpr const char* kPlanner = R"(# Role: planner

You lead a protein engineering session. Read the objective and decide what must be computed.

## Objective
{user_objective}

## Context supplied by the user
{protein_context_summary}

## Conversation so far
{interaction_history}

## Tools you may plan with
{tools_description}

## Skills
{skills_metadata}

## Output
Reply with JSON only.
- A plan is an array of steps. Each step has integer "step" (1, 2, ...), "task_description", "tool_name" and a
  "tool_input" object whose keys are the tool's parameter names.
- A parameter that needs an earlier result is written "dependency:step_<N>" for the whole output or
  "dependency:step_<N>:<field>" for one field. N must be smaller than the current step.
- Use "<default_output_dir>" in paths you want placed in the session output directory.
- For choice parameters use one of the allowed values exactly.
- When the objective is too ambiguous to plan, reply {{"need_clarification": true, "preliminary_plan": "...", "question": "..."}}.
- When no tool is needed, reply [].

Example:
[{{"step": 1, "task_description": "Fetch the sequence", "tool_name": "download_uniprot_seq_by_id",
  "tool_input": {{"uniprot_id": "P00001", "out_path": "<default_output_dir>/P00001.fasta"}}}}]
)";

constexpr const char* kDesigner = R"(# Role: pipeline designer

You turn the planner's research notes into an executable pipeline and later check each step's result.
The executor only runs a step after you instruct it to.

## Objective
{user_objective}

## Planner notes
{pi_report}

## Context supplied by the user
{protein_context_summary}

## Tools
{tools_description}

## Skills
{skills_metadata}

## Step planning
{computational_biologist_step_planning}

## Output
A JSON array of steps with keys "step", "goal", "success_criteria", "task_description", "tool_name", "tool_input".
Every tool_name must come from the tool list. Write success criteria that can be checked against the output,
for example "output has key file_path". References to earlier outputs use "dependency:step_<N>[:<field>]".
)";

constexpr const char* kExecutor = R"(# Role: executor

You run exactly the step you were instructed to run, once, with the given parameters.

## Tools available in this run
{available_tools_list}

## Skills available in this run
{available_skills_meta}

## Instruction
{cb_instruction}

## Step
{step_json}

## Attempts so far
{attempt_log}

## After each attempt
{machine_learning_specialist_post_step_check}

## Reply format
- To retry with corrected parameters reply {{"tool_input": {{...}}}} with the full parameter object.
- To stop reply "Final Answer: " followed by a short JSON summary of what went wrong.
)";

constexpr const char* kCritic = R"(# Role: critic

Write the final report for the user. Every claim must be backed by the run record below.

## Objective
{user_objective}

## Run record
{full_run_record}

## Analysis log
{analysis_log}

## References
{references}

## Rules
- Cite references only as [n], where n is the number of an entry in the reference list. Cite nothing that is not listed.
- Report numbers exactly as they appear in the run record.
- Include a "## Conclusions" section with one to three numbered conclusions.
- State clearly which steps failed or could not be verified.
)";

constexpr const char* kAnalyst = R"(# Role: analyst

Critique one answer to a benchmark instance. Do not score it.

## Query
{query}

## Checkable constraints
{constraints}

## Answer
{response}

Reply with a JSON object with string fields "scientific_validity", "evidence_sufficiency",
"logical_consistency" and "summary".
)";

constexpr const char* kJudge = R"(# Role: judge

Two answers to the same query were critiqued independently. Decide which answer is better using only the
critiques and the constraints.

## Query
{query}

## Checkable constraints
{constraints}

## Critique of answer A
{critique_a}

## Critique of answer B
{critique_b}

Reply with a JSON object {{"winner": "a" | "b", "rationale": "..."}}.
)";

RoleTemplate make(Role role, const char* text)
{
    return RoleTemplate{role, text, template_placeholders(text)};
}

} // namespace

std::set<std::string> template_placeholders(std::string_view text)
{
    std::set<std::string> names;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '{' && i + 1 < text.size() && text[i + 1] == '{') {
            ++i;
            continue;
        }
        if (text[i] != '{') continue;
        std::size_t j = i + 1;
        while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
        if (j < text.size() && text[j] == '}' && j > i + 1 && !std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
            names.emplace(text.substr(i + 1, j - i - 1));
            i = j;
        }
    }
    return names;
}

std::string render(std::string_view text, const std::map<std::string, std::string>& bindings)
{
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if ((c == '{' || c == '}') && i + 1 < text.size() && text[i + 1] == c) {
            out.push_back(c);
            ++i;
            continue;
        }
        if (c == '{') {
            std::size_t j = i + 1;
            while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
            if (j < text.size() && text[j] == '}' && j > i + 1 &&
                !std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
                const std::string name(text.substr(i + 1, j - i - 1));
                auto it = bindings.find(name);
                if (it == bindings.end()) throw Error(Errc::missing_binding, name);
                out += it->second;
                i = j;
                continue;
            }
        }
        out.push_back(c);
    }
    return out;
}

const RoleTemplate& role_template(Role role)
{
    static const std::map<Role, RoleTemplate> templates{
        {Role::PI, make(Role::PI, kPlanner)},          {Role::CB, make(Role::CB, kDesigner)},
        {Role::MLS, make(Role::MLS, kExecutor)},       {Role::SC, make(Role::SC, kCritic)},
        {Role::Analyst, make(Role::Analyst, kAnalyst)}, {Role::Judge, make(Role::Judge, kJudge)},
    };
    return templates.at(role);
}

std::string render_template(Role role, const std::map<std::string, std::string>& bindings)
{
    return render(role_template(role).text, bindings);
}

std::string default_step_planning_guidance()
{
    return "One tool call per step. Put every file a step needs in its tool_input, either as a path from the "
           "context or as a dependency on the step that produces it. Prefer built-in tools over generated code.";
}

std::string default_post_step_check()
{
    return "Check that the output reports success and contains the fields the step's success criteria name. "
           "A search that returns an empty result list is not a success: retry once with fewer or broader keywords.";
}

} // namespace evoflow
