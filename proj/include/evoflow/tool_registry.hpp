#pragma once

#include "evoflow/json.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace evoflow {

class ExecutorTable;

enum class ToolCategory { research_search, database, discovery, directed_evolution, automl, code_execution, plumbing };

enum class ParamKind { string, integer, real, boolean, file_path, enum_choice, list_of_strings, map };

std::string_view to_string(ToolCategory category);
std::string_view to_string(ParamKind kind);
ToolCategory parse_tool_category(std::string_view text);
ParamKind parse_param_kind(std::string_view text);

struct ParamSpec {
    std::string name;
    ParamKind kind = ParamKind::string;
    bool required = false;
    std::optional<Json> default_value;
    std::optional<std::vector<Json>> allowed;

    bool operator==(const ParamSpec&) const = default;
};

struct ToolDescriptor {
    std::string name;
    std::string description;
    ToolCategory category = ToolCategory::plumbing;
    std::vector<ParamSpec> params;
    std::string executor;

    const ParamSpec* param(std::string_view param_name) const;
    bool operator==(const ToolDescriptor&) const = default;
};

struct SkillDoc {
    std::string skill_id;
    std::string title;
    std::string body;

    bool operator==(const SkillDoc&) const = default;
};

struct SynthesizedToolManifest {
    ToolDescriptor tool;
    std::string checkpoint_ref;
    std::vector<ParamSpec> inference_inputs;
    std::string output_description;
    std::map<std::string, double> metrics;
    std::string created_at;
    std::string provenance;

    bool operator==(const SynthesizedToolManifest&) const = default;
};

// Metric names a synthesized manifest may report.
const std::set<std::string>& manifest_metric_keys();

Json to_json(const ParamSpec& spec);
Json to_json(const ToolDescriptor& desc);
Json to_json(const SkillDoc& doc);
Json to_json(const SynthesizedToolManifest& manifest);
ParamSpec param_spec_from_json(const Json& j);
ToolDescriptor tool_descriptor_from_json(const Json& j);
SkillDoc skill_doc_from_json(const Json& j);
SynthesizedToolManifest manifest_from_json(const Json& j);

// Throws malformed-schema when a descriptor breaks its invariants.
void check_descriptor(const ToolDescriptor& desc);

struct RegistrationReceipt {
    std::string name;
    std::uint64_t version = 0;
    std::optional<std::filesystem::path> manifest_path;
};

struct InvocationDiagnostic {
    std::string tool;
    std::string param;
    std::string code;    // error code name, e.g. "invalid-choice"
    std::string message;
};

// Typed catalog of tools and skills. Lookups may run concurrently; registrations
// take an exclusive lock. Descriptors are immutable once registered.
class ToolRegistry {
public:
    // The executor table is used only to check binding keys and checkpoint refs.
    explicit ToolRegistry(const ExecutorTable& executors, std::optional<std::filesystem::path> manifests_dir = {});

    // Reloads every manifest persisted under manifests_dir.
    void load_manifests();

    RegistrationReceipt register_tool(const ToolDescriptor& desc);
    RegistrationReceipt register_synthesized(const SynthesizedToolManifest& manifest);
    void register_skill(const SkillDoc& doc);

    std::optional<ToolDescriptor> find(std::string_view name) const;
    ToolDescriptor get(std::string_view name) const;
    std::optional<SynthesizedToolManifest> manifest(std::string_view name) const;
    std::vector<ToolDescriptor> list() const;
    std::vector<ToolDescriptor> list(ToolCategory category) const;
    std::vector<SkillDoc> skills() const;
    SkillDoc lookup_skill(std::string_view skill_id) const;
    std::uint64_t version() const;

    // Returns the fully-populated argument map or throws the first violation.
    Json validate_invocation(std::string_view name, const Json& args) const;

    // Non-throwing check. Keys in `deferred` count as present but are not type-checked.
    std::vector<InvocationDiagnostic> check_invocation(std::string_view name, const Json& args,
                                                       const std::set<std::string>& deferred = {}) const;

private:
    std::filesystem::path manifest_path(std::string_view name) const;
    void insert_locked(const ToolDescriptor& desc);

    const ExecutorTable& executors_;
    std::optional<std::filesystem::path> manifests_dir_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, ToolDescriptor, std::less<>> tools_;
    std::map<std::string, SynthesizedToolManifest, std::less<>> manifests_;
    std::map<std::string, SkillDoc, std::less<>> skills_;
    std::uint64_t version_ = 0;
};

} // namespace evoflow
