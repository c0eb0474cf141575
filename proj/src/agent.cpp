#include "evoflow/agent.hpp"

#include "evoflow/error.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace evoflow {

namespace {

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string first_json_char_view(std::string_view text)
{
    const auto pos = text.find_first_not_of(" \t\r\n");
    return pos == std::string_view::npos ? std::string() : std::string(1, text[pos]);
}

} // namespace

std::string_view to_string(Role role)
{
    switch (role) {
    case Role::PI: return "PI";
    case Role::CB: return "CB";
    case Role::MLS: return "MLS";
    case Role::SC: return "SC";
    case Role::Analyst: return "Analyst";
    case Role::Judge: return "Judge";
    }
    return "?";
}

Role parse_role(std::string_view text)
{
    for (Role r : {Role::PI, Role::CB, Role::MLS, Role::SC, Role::Analyst, Role::Judge})
        if (lower(to_string(r)) == lower(text)) return r;
    throw Error(Errc::invalid_argument, "unknown role '" + std::string(text) + "'");
}

Json to_json(const ChatExchange& x)
{
    Json messages = Json::array();
    for (const auto& m : x.messages)
        messages.push_back({{"speaker", m.speaker == ChatMessage::Speaker::user ? "user" : "assistant"},
                            {"content", m.content}});
    Json j{{"role", to_string(x.role)}, {"system", x.system}, {"messages", messages}, {"response", x.response}};
    if (x.usage) j["usage"] = *x.usage;
    return j;
}

ScriptedBackend ScriptedBackend::from_json(const Json& entries)
{
    if (!entries.is_array()) throw Error(Errc::malformed_json, "chat fixture must be an array of {role, response}");
    ScriptedBackend b;
    for (const auto& e : entries) {
        if (!e.is_object() || !e.contains("role") || !e.contains("response"))
            throw Error(Errc::malformed_json, "chat fixture entry needs role and response");
        const Json& r = e["response"];
        b.push(parse_role(e["role"].get<std::string>()), r.is_string() ? r.get<std::string>() : r.dump(2));
    }
    return b;
}

ScriptedBackend ScriptedBackend::load(const std::filesystem::path& file)
{
    // Scripted plans may name fixture data files through "${fixtures}", like tool fixtures do.
    Json entries = read_json_file(file);
    const std::string base = std::filesystem::absolute(file).parent_path().generic_string();
    static const std::string kToken = "${fixtures}";
    if (entries.is_array())
        for (auto& e : entries) {
            if (!e.is_object() || !e.contains("response")) continue;
            Json& r = e["response"];
            std::string s = r.is_string() ? r.get<std::string>() : r.dump(2);
            for (auto pos = s.find(kToken); pos != std::string::npos; pos = s.find(kToken, pos + base.size()))
                s.replace(pos, kToken.size(), base);
            r = s;
        }
    return from_json(entries);
}

ScriptedBackend::ScriptedBackend(const ScriptedBackend& other) : ChatBackend()
{
    std::scoped_lock lock(other.mutex_);
    script_ = other.script_;
    cursor_ = other.cursor_;
}

void ScriptedBackend::push(Role role, std::string response)
{
    std::scoped_lock lock(mutex_);
    script_[role].push_back(std::move(response));
}

std::size_t ScriptedBackend::remaining(Role role) const
{
    std::scoped_lock lock(mutex_);
    auto it = script_.find(role);
    if (it == script_.end()) return 0;
    auto c = cursor_.find(role);
    return it->second.size() - (c == cursor_.end() ? 0 : c->second);
}

std::string ScriptedBackend::complete(Role role, const std::string&, const std::vector<ChatMessage>&,
                                      std::optional<Json>* usage)
{
    std::scoped_lock lock(mutex_);
    auto& cursor = cursor_[role];
    auto it = script_.find(role);
    if (it == script_.end() || cursor >= it->second.size())
        throw Error(Errc::fixture_exhausted,
                    std::string(to_string(role)) + " turn " + std::to_string(cursor + 1) + " has no scripted response");
    if (usage) usage->reset();
    return it->second[cursor++];
}

std::unique_ptr<ChatBackend> ScriptedBackend::fresh() const
{
    auto copy = std::make_unique<ScriptedBackend>();
    std::scoped_lock lock(mutex_);
    copy->script_ = script_;
    return copy;
}

HttpBackend::HttpBackend(HttpBinding binding) : binding_(std::move(binding))
{
    if (binding_.endpoint.find("://") == std::string::npos)
        throw Error(Errc::invalid_argument, "endpoint must be an http(s) URL");
    if (binding_.token_env.empty()) throw Error(Errc::invalid_argument, "http binding needs a token env-var name");
    if (!(binding_.timeout_s > 0.0)) throw Error(Errc::invalid_argument, "timeout must be positive");
    if (binding_.max_retries < 0) throw Error(Errc::invalid_argument, "max_retries must be >= 0");
}

Json HttpBackend::request_body(const std::string& model, const std::string& system,
                               const std::vector<ChatMessage>& messages)
{
    Json msgs = Json::array();
    msgs.push_back({{"role", "system"}, {"content", system}});
    for (const auto& m : messages)
        msgs.push_back({{"role", m.speaker == ChatMessage::Speaker::user ? "user" : "assistant"}, {"content", m.content}});
    return Json{{"model", model}, {"messages", msgs}, {"stream", false}};
}

std::string HttpBackend::response_text(const Json& body)
{
    try {
        const Json& content = body.at("choices").at(0).at("message").at("content");
        if (!content.is_string() || content.get<std::string>().empty())
            throw Error(Errc::parse_failure, "empty completion");
        return content.get<std::string>();
    } catch (const Json::exception& e) {
        throw Error(Errc::parse_failure, std::string("completion body: ") + e.what());
    }
}

std::string HttpBackend::complete(Role, const std::string& system, const std::vector<ChatMessage>& messages,
                                  std::optional<Json>* usage)
{
    const auto scheme_end = binding_.endpoint.find("://");
    const auto path_start = binding_.endpoint.find('/', scheme_end + 3);
    const std::string base = binding_.endpoint.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : binding_.endpoint.substr(path_start);

    httplib::Client client(base);
    const auto secs = static_cast<time_t>(binding_.timeout_s);
    const auto usecs = static_cast<time_t>((binding_.timeout_s - std::floor(binding_.timeout_s)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (const char* token = std::getenv(binding_.token_env.c_str()); token && *token)
        headers.emplace("Authorization", std::string("Bearer ") + token);
    const std::string body = request_body(binding_.model, system, messages).dump();

    std::string last_error = "no attempt made";
    bool timed_out = false;
    for (int attempt = 0; attempt <= binding_.max_retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(200 * attempt));
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) {
            timed_out = res.error() == httplib::Error::Read || res.error() == httplib::Error::ConnectionTimeout;
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            timed_out = false;
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status < 200 || res->status >= 300)
            throw Error(Errc::backend_unreachable, binding_.endpoint + " answered HTTP " + std::to_string(res->status));
        const Json parsed = Json::parse(res->body, nullptr, false);
        if (parsed.is_discarded()) throw Error(Errc::parse_failure, "completion body is not JSON");
        if (usage) {
            if (parsed.contains("usage"))
                *usage = parsed["usage"];
            else
                usage->reset();
        }
        return response_text(parsed);
    }
    const std::string msg = binding_.endpoint + " after " + std::to_string(binding_.max_retries + 1) +
                            " attempts: " + last_error;
    throw Error(timed_out ? Errc::backend_timeout : Errc::backend_unreachable, msg);
}

std::unique_ptr<ChatBackend> HttpBackend::fresh() const
{
    return std::make_unique<HttpBackend>(binding_);
}

std::unique_ptr<ChatBackend> make_backend(const BackendBinding& binding)
{
    if (binding.kind == BackendBinding::Kind::http) return std::make_unique<HttpBackend>(binding.http);
    if (binding.fixtures.empty()) throw Error(Errc::invalid_argument, "scripted backend needs a fixtures path");
    const auto file = std::filesystem::is_directory(binding.fixtures) ? binding.fixtures / "chat.json" : binding.fixtures;
    return std::make_unique<ScriptedBackend>(ScriptedBackend::load(file));
}

ChatExchange invoke_role(ChatBackend& backend, Role role, const std::map<std::string, std::string>& bindings,
                         const std::vector<ChatMessage>& dialogue)
{
    ChatExchange x;
    x.role = role;
    x.system = render_template(role, bindings);
    x.messages = dialogue;
    x.response = backend.complete(role, x.system, dialogue, &x.usage);
    if (x.response.empty()) throw Error(Errc::parse_failure, std::string(to_string(role)) + " returned an empty response");
    return x;
}

StructuredResponse extract_structured(Role role, std::string_view response, int turn)
{
    StructuredResponse out;
    const std::string body = strip_code_fences(response);
    const std::string tag = std::string(to_string(role)) + " turn " + std::to_string(turn) + ": ";
    try {
        if (role == Role::PI || role == Role::CB) {
            const std::string c = first_json_char_view(body);
            if (c != "[" && c != "{") {
                out.kind = StructuredResponse::Kind::prose;
                out.prose = std::string(response);
                return out;
            }
            out.parsed = parse_plan(body);
            switch (out.parsed.kind) {
            case ParsedPlan::Kind::plan: out.kind = StructuredResponse::Kind::plan; break;
            case ParsedPlan::Kind::clarification: out.kind = StructuredResponse::Kind::clarification; break;
            case ParsedPlan::Kind::empty: out.kind = StructuredResponse::Kind::empty_plan; break;
            }
            return out;
        }
        if (role == Role::Analyst || role == Role::Judge) {
            const Errc code = role == Role::Analyst ? Errc::analyst_parse_failure : Errc::judge_parse_failure;
            Json j = Json::parse(body, nullptr, false);
            if (j.is_discarded() || !j.is_object()) throw Error(code, "expected a JSON object");
            if (role == Role::Judge) {
                const std::string w = lower(j.value("winner", ""));
                if (w != "a" && w != "b") throw Error(code, "winner must be \"a\" or \"b\"");
                j["winner"] = w;
            } else {
                for (const char* k : {"scientific_validity", "evidence_sufficiency", "logical_consistency"})
                    if (!j.contains(k) || !j[k].is_string()) throw Error(code, std::string("missing field ") + k);
            }
            out.kind = StructuredResponse::Kind::judgment;
            out.judgment = std::move(j);
            return out;
        }
        out.kind = StructuredResponse::Kind::prose;
        out.prose = std::string(response);
        return out;
    } catch (const Error& e) {
        throw Error(e.code(), tag + e.detail());
    }
}

std::optional<std::string> map_closest_choice(std::string_view value, const std::vector<std::string>& allowed)
{
    const std::string v = lower(value);
    if (v.empty()) return std::nullopt;
    for (const auto& a : allowed)
        if (lower(a) == v) return a;
    std::optional<std::string> hit;
    for (const auto& a : allowed) {
        const std::string la = lower(a);
        if (la.find(v) != std::string::npos || v.find(la) != std::string::npos) {
            if (hit) return std::nullopt;
            hit = a;
        }
    }
    return hit;
}

std::optional<std::string> lint_search_query(std::string_view query)
{
    for (unsigned char c : query)
        if (c >= 0x80) return "search query contains non-ASCII text; queries should be English keywords";
    return std::nullopt;
}

} // namespace evoflow
