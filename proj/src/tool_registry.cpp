#include "evoflow/tool_registry.hpp"

#include "evoflow/error.hpp"
#include "evoflow/executors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <mutex>
#include <utility>

namespace evoflow {

namespace {

constexpr std::array<std::pair<ToolCategory, std::string_view>, 7> kCategories{{
    {ToolCategory::research_search, "research-search"},
    {ToolCategory::database, "database"},
    {ToolCategory::discovery, "discovery"},
    {ToolCategory::directed_evolution, "directed-evolution"},
    {ToolCategory::automl, "automl"},
    {ToolCategory::code_execution, "code-execution"},
    {ToolCategory::plumbing, "plumbing"},
}};

constexpr std::array<std::pair<ParamKind, std::string_view>, 8> kKinds{{
    {ParamKind::string, "string"},
    {ParamKind::integer, "integer"},
    {ParamKind::real, "real"},
    {ParamKind::boolean, "boolean"},
    {ParamKind::file_path, "file-path"},
    {ParamKind::enum_choice, "enum-choice"},
    {ParamKind::list_of_strings, "list-of-strings"},
    {ParamKind::map, "map"},
}};

bool kind_accepts(ParamKind kind, const Json& v)
{
    switch (kind) {
    case ParamKind::string:
    case ParamKind::file_path: return v.is_string();
    case ParamKind::integer: return v.is_number_integer();
    case ParamKind::real: return v.is_number();
    case ParamKind::boolean: return v.is_boolean();
    case ParamKind::enum_choice: return v.is_string() || v.is_number() || v.is_boolean();
    case ParamKind::list_of_strings:
        return v.is_array() && std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_string(); });
    case ParamKind::map: return v.is_object();
    }
    return false;
}

bool value_allowed(const ParamSpec& spec, const Json& v)
{
    if (!spec.allowed) return true;
    return std::find(spec.allowed->begin(), spec.allowed->end(), v) != spec.allowed->end();
}

bool valid_tool_name(std::string_view name)
{
    if (name.empty() || name.front() == '.') return false;
    return std::all_of(name.begin(), name.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
               c == '.';
    });
}

} // namespace

std::string_view to_string(ToolCategory category)
{
    for (const auto& [c, s] : kCategories)
        if (c == category) return s;
    return "plumbing";
}

std::string_view to_string(ParamKind kind)
{
    for (const auto& [k, s] : kKinds)
        if (k == kind) return s;
    return "string";
}

ToolCategory parse_tool_category(std::string_view text)
{
    for (const auto& [c, s] : kCategories)
        if (s == text) return c;
    throw Error(Errc::malformed_schema, "unknown tool category '" + std::string(text) + "'");
}

ParamKind parse_param_kind(std::string_view text)
{
    for (const auto& [k, s] : kKinds)
        if (s == text) return k;
    throw Error(Errc::malformed_schema, "unknown parameter kind '" + std::string(text) + "'");
}

const ParamSpec* ToolDescriptor::param(std::string_view param_name) const
{
    for (const auto& p : params)
        if (p.name == param_name) return &p;
    return nullptr;
}

const std::set<std::string>& manifest_metric_keys()
{
    static const std::set<std::string> keys{"accuracy", "mcc", "f1", "precision", "recall", "auroc", "spearman",
                                            "mse", "loss"};
    return keys;
}

Json to_json(const ParamSpec& spec)
{
    Json j{{"name", spec.name}, {"kind", to_string(spec.kind)}, {"required", spec.required}};
    if (spec.default_value) j["default"] = *spec.default_value;
    if (spec.allowed) j["allowed"] = *spec.allowed;
    return j;
}

Json to_json(const ToolDescriptor& desc)
{
    Json params = Json::array();
    for (const auto& p : desc.params) params.push_back(to_json(p));
    return Json{{"name", desc.name},
                {"description", desc.description},
                {"category", to_string(desc.category)},
                {"params", std::move(params)},
                {"executor", desc.executor}};
}

Json to_json(const SkillDoc& doc)
{
    return Json{{"skill_id", doc.skill_id}, {"title", doc.title}, {"body", doc.body}};
}

Json to_json(const SynthesizedToolManifest& m)
{
    Json inputs = Json::array();
    for (const auto& p : m.inference_inputs) inputs.push_back(to_json(p));
    Json metrics = Json::object();
    for (const auto& [k, v] : m.metrics) metrics[k] = v;
    return Json{{"tool", to_json(m.tool)},
                {"checkpoint_ref", m.checkpoint_ref},
                {"inference_schema", {{"inputs", std::move(inputs)}, {"outputs", m.output_description}}},
                {"metrics", std::move(metrics)},
                {"created_at", m.created_at},
                {"provenance", m.provenance}};
}

ParamSpec param_spec_from_json(const Json& j)
{
    if (!j.is_object() || !j.contains("name") || !j["name"].is_string())
        throw Error(Errc::malformed_schema, "parameter spec needs a string 'name'");
    ParamSpec p;
    p.name = j["name"].get<std::string>();
    p.kind = parse_param_kind(j.value("kind", std::string("string")));
    p.required = j.value("required", false);
    if (j.contains("default") && !j["default"].is_null()) p.default_value = j["default"];
    if (j.contains("allowed") && !j["allowed"].is_null()) {
        if (!j["allowed"].is_array()) throw Error(Errc::malformed_schema, "'allowed' of " + p.name + " is not a list");
        p.allowed = j["allowed"].get<std::vector<Json>>();
    }
    return p;
}

ToolDescriptor tool_descriptor_from_json(const Json& j)
{
    if (!j.is_object()) throw Error(Errc::malformed_schema, "tool descriptor must be an object");
    ToolDescriptor d;
    try {
        d.name = j.at("name").get<std::string>();
        d.description = j.value("description", std::string());
        d.category = parse_tool_category(j.value("category", std::string("plumbing")));
        d.executor = j.value("executor", std::string());
    } catch (const Json::exception& e) {
        throw Error(Errc::malformed_schema, e.what());
    }
    if (j.contains("params")) {
        if (!j["params"].is_array()) throw Error(Errc::malformed_schema, "'params' of " + d.name + " is not a list");
        for (const auto& p : j["params"]) d.params.push_back(param_spec_from_json(p));
    }
    return d;
}

SkillDoc skill_doc_from_json(const Json& j)
{
    try {
        return SkillDoc{j.at("skill_id").get<std::string>(), j.value("title", std::string()),
                        j.value("body", std::string())};
    } catch (const Json::exception& e) {
        throw Error(Errc::malformed_schema, e.what());
    }
}

SynthesizedToolManifest manifest_from_json(const Json& j)
{
    if (!j.is_object() || !j.contains("tool")) throw Error(Errc::malformed_schema, "manifest needs a 'tool' object");
    SynthesizedToolManifest m;
    m.tool = tool_descriptor_from_json(j["tool"]);
    m.checkpoint_ref = j.value("checkpoint_ref", std::string());
    if (j.contains("inference_schema")) {
        const Json& s = j["inference_schema"];
        if (s.contains("inputs"))
            for (const auto& p : s["inputs"]) m.inference_inputs.push_back(param_spec_from_json(p));
        m.output_description = s.value("outputs", std::string());
    }
    if (j.contains("metrics")) {
        for (const auto& [k, v] : j["metrics"].items()) {
            if (!v.is_number()) throw Error(Errc::malformed_schema, "metric '" + k + "' is not a number");
            m.metrics[k] = v.get<double>();
        }
    }
    m.created_at = j.value("created_at", std::string());
    m.provenance = j.value("provenance", std::string());
    return m;
}

void check_descriptor(const ToolDescriptor& desc)
{
    if (!valid_tool_name(desc.name))
        throw Error(Errc::malformed_schema, "tool name '" + desc.name + "' is empty or not filename-safe");
    std::set<std::string> seen;
    bool optional_seen = false;
    for (const auto& p : desc.params) {
        if (p.name.empty()) throw Error(Errc::malformed_schema, desc.name + ": parameter with empty name");
        if (!seen.insert(p.name).second)
            throw Error(Errc::malformed_schema, desc.name + ": parameter '" + p.name + "' declared twice");
        if (p.required) {
            if (optional_seen)
                throw Error(Errc::malformed_schema, desc.name + ": required '" + p.name + "' follows optional params");
            if (p.default_value)
                throw Error(Errc::malformed_schema, desc.name + ": required '" + p.name + "' carries a default");
        } else {
            optional_seen = true;
        }
        if (p.kind == ParamKind::enum_choice && (!p.allowed || p.allowed->empty()))
            throw Error(Errc::malformed_schema, desc.name + ": enum '" + p.name + "' has no allowed values");
        if (p.allowed && p.allowed->empty())
            throw Error(Errc::malformed_schema, desc.name + ": '" + p.name + "' has an empty allowed list");
        if (p.default_value) {
            if (!kind_accepts(p.kind, *p.default_value))
                throw Error(Errc::malformed_schema, desc.name + ": default of '" + p.name + "' has the wrong kind");
            if (!value_allowed(p, *p.default_value))
                throw Error(Errc::malformed_schema,
                            desc.name + ": default " + canonical(*p.default_value) + " of '" + p.name +
                                "' is not in its allowed list");
        }
    }
}

ToolRegistry::ToolRegistry(const ExecutorTable& executors, std::optional<std::filesystem::path> manifests_dir)
    : executors_(executors), manifests_dir_(std::move(manifests_dir))
{
}

std::filesystem::path ToolRegistry::manifest_path(std::string_view name) const
{
    return *manifests_dir_ / (std::string(name) + ".json");
}

void ToolRegistry::insert_locked(const ToolDescriptor& desc)
{
    if (tools_.count(desc.name)) throw Error(Errc::duplicate_name, "tool '" + desc.name + "' is already registered");
    tools_.emplace(desc.name, desc);
    ++version_;
}

void ToolRegistry::load_manifests()
{
    if (!manifests_dir_ || !std::filesystem::is_directory(*manifests_dir_)) return;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(*manifests_dir_))
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    std::unique_lock lock(mutex_);
    for (const auto& file : files) {
        auto m = manifest_from_json(read_json_file(file));
        check_descriptor(m.tool);
        if (!executors_.contains(m.tool.executor))
            throw Error(Errc::unknown_executor, m.tool.name + ": executor '" + m.tool.executor + "' is not bound");
        if (manifests_.count(m.tool.name)) continue;
        insert_locked(m.tool);
        manifests_.emplace(m.tool.name, std::move(m));
    }
}

RegistrationReceipt ToolRegistry::register_tool(const ToolDescriptor& desc)
{
    check_descriptor(desc);
    if (!executors_.contains(desc.executor))
        throw Error(Errc::unknown_executor, desc.name + ": executor '" + desc.executor + "' is not bound");
    std::unique_lock lock(mutex_);
    insert_locked(desc);
    return {desc.name, version_, std::nullopt};
}

RegistrationReceipt ToolRegistry::register_synthesized(const SynthesizedToolManifest& manifest)
{
    const auto& desc = manifest.tool;
    check_descriptor(desc);
    if (desc.category != ToolCategory::automl)
        throw Error(Errc::malformed_schema, desc.name + ": synthesized tools must be in the automl category");
    for (const auto& [k, v] : manifest.metrics) {
        if (!manifest_metric_keys().count(k)) throw Error(Errc::invalid_metric_key, "metric '" + k + "'");
        if (!std::isfinite(v)) throw Error(Errc::malformed_schema, "metric '" + k + "' is not finite");
    }
    if (!executors_.contains(desc.executor))
        throw Error(Errc::unknown_executor, desc.name + ": executor '" + desc.executor + "' is not bound");
    if (manifest.checkpoint_ref.empty() || !executors_.resolves_checkpoint(manifest.checkpoint_ref))
        throw Error(Errc::dangling_checkpoint, desc.name + ": checkpoint '" + manifest.checkpoint_ref + "'");

    std::unique_lock lock(mutex_);
    if (tools_.count(desc.name)) throw Error(Errc::duplicate_name, "tool '" + desc.name + "' is already registered");
    std::optional<std::filesystem::path> path;
    if (manifests_dir_) {
        path = manifest_path(desc.name);
        write_text_file(*path, to_json(manifest).dump(2) + "\n");
    }
    insert_locked(desc);
    manifests_.emplace(desc.name, manifest);
    return {desc.name, version_, path};
}

void ToolRegistry::register_skill(const SkillDoc& doc)
{
    if (doc.skill_id.empty()) throw Error(Errc::malformed_schema, "skill_id is empty");
    std::unique_lock lock(mutex_);
    if (skills_.count(doc.skill_id)) throw Error(Errc::duplicate_name, "skill '" + doc.skill_id + "'");
    skills_.emplace(doc.skill_id, doc);
    ++version_;
}

std::optional<ToolDescriptor> ToolRegistry::find(std::string_view name) const
{
    std::shared_lock lock(mutex_);
    auto it = tools_.find(name);
    if (it == tools_.end()) return std::nullopt;
    return it->second;
}

ToolDescriptor ToolRegistry::get(std::string_view name) const
{
    auto d = find(name);
    if (!d) throw Error(Errc::unknown_tool, "'" + std::string(name) + "'");
    return *d;
}

std::optional<SynthesizedToolManifest> ToolRegistry::manifest(std::string_view name) const
{
    std::shared_lock lock(mutex_);
    auto it = manifests_.find(name);
    if (it == manifests_.end()) return std::nullopt;
    return it->second;
}

std::vector<ToolDescriptor> ToolRegistry::list() const
{
    std::shared_lock lock(mutex_);
    std::vector<ToolDescriptor> out;
    out.reserve(tools_.size());
    for (const auto& [_, d] : tools_) out.push_back(d);
    return out;
}

std::vector<ToolDescriptor> ToolRegistry::list(ToolCategory category) const
{
    std::shared_lock lock(mutex_);
    std::vector<ToolDescriptor> out;
    for (const auto& [_, d] : tools_)
        if (d.category == category) out.push_back(d);
    return out;
}

std::vector<SkillDoc> ToolRegistry::skills() const
{
    std::shared_lock lock(mutex_);
    std::vector<SkillDoc> out;
    for (const auto& [_, s] : skills_) out.push_back(s);
    return out;
}

SkillDoc ToolRegistry::lookup_skill(std::string_view skill_id) const
{
    std::shared_lock lock(mutex_);
    auto it = skills_.find(skill_id);
    if (it == skills_.end()) throw Error(Errc::not_found, "skill '" + std::string(skill_id) + "'");
    return it->second;
}

std::uint64_t ToolRegistry::version() const
{
    std::shared_lock lock(mutex_);
    return version_;
}

std::vector<InvocationDiagnostic> ToolRegistry::check_invocation(std::string_view name, const Json& args,
                                                                 const std::set<std::string>& deferred) const
{
    std::vector<InvocationDiagnostic> out;
    const std::string tool(name);
    auto desc = find(name);
    if (!desc) {
        out.push_back({tool, "", std::string(to_string(Errc::unknown_tool)), "no tool named '" + tool + "'"});
        return out;
    }
    if (!args.is_object()) {
        out.push_back({tool, "", std::string(to_string(Errc::type_mismatch)), "arguments must be an object"});
        return out;
    }
    for (const auto& [key, value] : args.items()) {
        (void)value;
        if (!desc->param(key))
            out.push_back({tool, key, std::string(to_string(Errc::unknown_param)),
                           "'" + key + "' is not a parameter of " + tool});
    }
    for (const auto& p : desc->params) {
        auto it = args.find(p.name);
        if (it == args.end() || it->is_null()) {
            if (p.required && !deferred.count(p.name))
                out.push_back({tool, p.name, std::string(to_string(Errc::missing_required)),
                               "required parameter '" + p.name + "' is absent"});
            continue;
        }
        if (deferred.count(p.name)) continue;
        if (!kind_accepts(p.kind, *it)) {
            out.push_back({tool, p.name, std::string(to_string(Errc::type_mismatch)),
                           "'" + p.name + "' expects " + std::string(to_string(p.kind)) + ", got " + canonical(*it)});
            continue;
        }
        if (!value_allowed(p, *it))
            out.push_back({tool, p.name, std::string(to_string(Errc::invalid_choice)),
                           "'" + p.name + "' = " + canonical(*it) + " is not an allowed value"});
    }
    return out;
}

Json ToolRegistry::validate_invocation(std::string_view name, const Json& args) const
{
    auto diags = check_invocation(name, args);
    if (!diags.empty()) {
        const auto& d = diags.front();
        static const std::array<Errc, 5> codes{Errc::unknown_tool, Errc::type_mismatch, Errc::unknown_param,
                                               Errc::missing_required, Errc::invalid_choice};
        for (Errc c : codes)
            if (d.code == to_string(c)) throw Error(c, d.message);
        throw Error(Errc::invalid_argument, d.message);
    }
    auto desc = get(name);
    Json out = Json::object();
    for (const auto& p : desc.params) {
        auto it = args.find(p.name);
        if (it != args.end() && !it->is_null())
            out[p.name] = *it;
        else if (p.default_value)
            out[p.name] = *p.default_value;
    }
    return out;
}

} // namespace evoflow
