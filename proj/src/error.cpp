#include "evoflow/error.hpp"

namespace evoflow {

std::string_view to_string(Errc code) noexcept
{
    switch (code) {
    case Errc::duplicate_name: return "duplicate-name";
    case Errc::malformed_schema: return "malformed-schema";
    case Errc::unknown_tool: return "unknown-tool";
    case Errc::unknown_param: return "unknown-param";
    case Errc::type_mismatch: return "type-mismatch";
    case Errc::missing_required: return "missing-required";
    case Errc::invalid_choice: return "invalid-choice";
    case Errc::not_found: return "not-found";
    case Errc::dangling_checkpoint: return "dangling-checkpoint";
    case Errc::unknown_executor: return "unknown-executor";
    case Errc::malformed_json: return "malformed-json";
    case Errc::schema_violation: return "schema-violation";
    case Errc::forward_dependency: return "forward-dependency";
    case Errc::malformed_ordinal: return "malformed-ordinal";
    case Errc::unresolved_dependency: return "unresolved-dependency";
    case Errc::missing_field: return "missing-field";
    case Errc::missing_binding: return "missing-binding";
    case Errc::backend_unreachable: return "backend-unreachable";
    case Errc::backend_timeout: return "backend-timeout";
    case Errc::fixture_exhausted: return "scripted-fixture-exhausted";
    case Errc::parse_failure: return "parse-failure";
    case Errc::plan_validation_failed: return "plan-validation-failed";
    case Errc::step_failed: return "step-failed-after-retries";
    case Errc::clarification_timeout: return "aborted-awaiting-clarification-timeout";
    case Errc::citation_audit_failed: return "citation-audit-failed";
    case Errc::wrong_phase: return "wrong-phase";
    case Errc::malformed_token: return "malformed-token";
    case Errc::position_out_of_range: return "position-out-of-range";
    case Errc::wild_mismatch: return "wild-mismatch";
    case Errc::empty_observations: return "empty-observations";
    case Errc::non_finite_score: return "non-finite-score";
    case Errc::unknown_mutation: return "unknown-mutation";
    case Errc::order_exceeds_mutation_count: return "order-exceeds-mutation-count";
    case Errc::missing_column: return "missing-column";
    case Errc::empty_input: return "empty-input";
    case Errc::invalid_residue: return "invalid-residue";
    case Errc::contradictory_requirements: return "contradictory-requirements";
    case Errc::empty_matrix: return "empty-matrix";
    case Errc::unknown_method: return "unknown-method";
    case Errc::shape_mismatch: return "shape-mismatch";
    case Errc::empty_search_space: return "empty-search-space";
    case Errc::invalid_metric_key: return "invalid-metric-key";
    case Errc::malformed_record: return "malformed-record";
    case Errc::precondition: return "precondition";
    case Errc::fewer_than_two_models: return "fewer-than-two-models";
    case Errc::inconsistent_model_sets: return "inconsistent-model-sets";
    case Errc::score_out_of_range: return "score-out-of-range";
    case Errc::analyst_parse_failure: return "analyst-parse-failure";
    case Errc::judge_parse_failure: return "judge-parse-failure";
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::io: return "io";
    }
    return "unknown";
}

} // namespace evoflow
