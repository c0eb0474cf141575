#pragma once

#include "evoflow/json.hpp"
#include "evoflow/plan.hpp"

#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace evoflow {

// Analyst and Judge serve the evaluation harness; the other four run sessions.
enum class Role { PI, CB, MLS, SC, Analyst, Judge };

std::string_view to_string(Role role);
Role parse_role(std::string_view text);

struct RoleTemplate {
    Role role = Role::PI;
    std::string text;
    std::set<std::string> placeholders;
};

// Names of `{name}` placeholders in a template. `{{` and `}}` are literal braces.
std::set<std::string> template_placeholders(std::string_view text);

// Single-pass substitution; bound values are not rescanned. Throws missing-binding.
std::string render(std::string_view text, const std::map<std::string, std::string>& bindings);

const RoleTemplate& role_template(Role role);
std::string render_template(Role role, const std::map<std::string, std::string>& bindings);

// Filler for the two template slots whose content the engine supplies itself.
std::string default_step_planning_guidance();
std::string default_post_step_check();

struct ChatMessage {
    enum class Speaker { user, assistant };
    Speaker speaker = Speaker::user;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct ChatExchange {
    Role role = Role::PI;
    std::string system;
    std::vector<ChatMessage> messages;
    std::string response;
    std::optional<Json> usage;
};

Json to_json(const ChatExchange& exchange);

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    // Returns the raw model text for a rendered system prompt plus dialogue.
    virtual std::string complete(Role role, const std::string& system, const std::vector<ChatMessage>& messages,
                                 std::optional<Json>* usage) = 0;
    // An independent backend for a new session (scripted cursors start over).
    virtual std::unique_ptr<ChatBackend> fresh() const = 0;
};

// Ordered canned responses per role, consumed turn by turn. Running out is an
// error so unexpected extra turns fail loudly.
class ScriptedBackend : public ChatBackend {
public:
    ScriptedBackend() = default;
    ScriptedBackend(const ScriptedBackend& other);
    // Entries: [{role, response}], response may be text or any JSON value.
    static ScriptedBackend from_json(const Json& entries);
    // Expands "${fixtures}" in responses to the directory holding the file.
    static ScriptedBackend load(const std::filesystem::path& file);

    void push(Role role, std::string response);
    std::size_t remaining(Role role) const;

    std::string complete(Role role, const std::string& system, const std::vector<ChatMessage>& messages,
                         std::optional<Json>* usage) override;
    std::unique_ptr<ChatBackend> fresh() const override;

private:
    mutable std::mutex mutex_;
    std::map<Role, std::vector<std::string>> script_;
    std::map<Role, std::size_t> cursor_;
};

struct HttpBinding {
    std::string endpoint;  // e.g. http://127.0.0.1:8000/v1/chat/completions
    std::string model;
    std::string token_env = "EVOFLOW_API_TOKEN";
    double timeout_s = 120.0;
    int max_retries = 2;
};

// Chat-completions JSON over HTTP. Throws backend-unreachable after
// 1 + max_retries failed attempts and backend-timeout on read timeouts.
class HttpBackend : public ChatBackend {
public:
    explicit HttpBackend(HttpBinding binding);

    std::string complete(Role role, const std::string& system, const std::vector<ChatMessage>& messages,
                         std::optional<Json>* usage) override;
    std::unique_ptr<ChatBackend> fresh() const override;

    static Json request_body(const std::string& model, const std::string& system,
                             const std::vector<ChatMessage>& messages);
    // Text of choices[0].message.content. Throws parse-failure.
    static std::string response_text(const Json& body);

private:
    HttpBinding binding_;
};

struct BackendBinding {
    enum class Kind { scripted, http };
    Kind kind = Kind::scripted;
    std::filesystem::path fixtures;  // scripted: directory holding chat.json, or the file itself
    HttpBinding http;
};

// Validates the binding and builds the backend. Throws invalid-argument.
std::unique_ptr<ChatBackend> make_backend(const BackendBinding& binding);

ChatExchange invoke_role(ChatBackend& backend, Role role, const std::map<std::string, std::string>& bindings,
                         const std::vector<ChatMessage>& dialogue);

struct StructuredResponse {
    enum class Kind { plan, clarification, empty_plan, prose, judgment };
    Kind kind = Kind::prose;
    ParsedPlan parsed;
    std::string prose;
    Json judgment;
};

// PI/CB text that starts with `[` or `{` (after fences) goes through parse_plan;
// other PI/CB text and all SC text is prose; Analyst/Judge text must be a JSON object.
// Parse errors keep their code and gain a "<role> turn <n>" prefix.
StructuredResponse extract_structured(Role role, std::string_view response, int turn);

// Closest allowed value for a loose user term, e.g. "localization" ->
// "Subcellular Localization". Case-insensitive equality first, then a unique
// containment match. nullopt when nothing or several candidates fit.
std::optional<std::string> map_closest_choice(std::string_view value, const std::vector<std::string>& allowed);

// Warning text when a search query carries non-ASCII characters.
std::optional<std::string> lint_search_query(std::string_view query);

} // namespace evoflow
