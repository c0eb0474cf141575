#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace evoflow {

// Domain error codes, one per failure mode named in the module contracts.
enum class Errc {
    // tool registry
    duplicate_name,
    malformed_schema,
    unknown_tool,
    unknown_param,
    type_mismatch,
    missing_required,
    invalid_choice,
    not_found,
    dangling_checkpoint,
    unknown_executor,
    // plan engine
    malformed_json,
    schema_violation,
    forward_dependency,
    malformed_ordinal,
    unresolved_dependency,
    missing_field,
    // agent runtime
    missing_binding,
    backend_unreachable,
    backend_timeout,
    fixture_exhausted,
    parse_failure,
    // orchestrator
    plan_validation_failed,
    step_failed,
    clarification_timeout,
    citation_audit_failed,
    wrong_phase,
    // evolution toolkit
    malformed_token,
    position_out_of_range,
    wild_mismatch,
    empty_observations,
    non_finite_score,
    unknown_mutation,
    order_exceeds_mutation_count,
    missing_column,
    empty_input,
    invalid_residue,
    // automl
    contradictory_requirements,
    empty_matrix,
    unknown_method,
    shape_mismatch,
    empty_search_space,
    invalid_metric_key,
    // eval harness
    malformed_record,
    precondition,
    fewer_than_two_models,
    inconsistent_model_sets,
    score_out_of_range,
    analyst_parse_failure,
    judge_parse_failure,
    // generic
    invalid_argument,
    io,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

    Errc code() const noexcept { return code_; }
    // Message without the code prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    Errc code_;
    std::string detail_;
};

} // namespace evoflow
