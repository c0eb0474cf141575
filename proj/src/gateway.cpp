#include "evoflow/gateway.hpp"

#include "evoflow/builtin_tools.hpp"
#include "evoflow/error.hpp"
#include "evoflow/eval.hpp"
#include "evoflow/run_record.hpp"

#include <httplib.h>

#include <chrono>
#include <sstream>

namespace evoflow {

struct Gateway::Entry {
    std::string id;
    std::string objective;
    std::string created_at;
    std::optional<std::string> idempotency_key;
    std::unique_ptr<Session> session;    // null for sessions restored from disk
    std::vector<Event> restored_events;

    std::mutex run_mutex;  // held while run() or answer_clarification() executes
    std::thread worker;
    std::atomic<bool> busy{false};

    std::mutex wait_mutex;
    std::condition_variable appended;
    std::uint64_t version = 0;

    void notify()
    {
        {
            std::lock_guard lock(wait_mutex);
            ++version;
        }
        appended.notify_all();
    }

    std::vector<Event> events_after(std::optional<std::uint64_t> last) const
    {
        if (session) return session->record().events_after(last);
        const std::size_t from = last ? static_cast<std::size_t>(*last + 1) : 0;
        if (from >= restored_events.size()) return {};
        return {restored_events.begin() + static_cast<std::ptrdiff_t>(from), restored_events.end()};
    }

    std::string phase() const
    {
        if (session) return std::string(to_string(session->phase()));
        std::string phase = "Objective";
        for (const auto& e : restored_events)
            if (e.kind == event_kind::phase_change) phase = e.payload.value("to", phase);
        return phase;
    }

    // No further events will be appended.
    bool finished() const
    {
        if (!session) return true;
        const Phase p = session->phase();
        return p == Phase::Done || p == Phase::Failed;
    }
};

namespace {

Json error_body(const std::string& code, const std::string& message)
{
    return Json{{"error", {{"code", code}, {"message", message}}}};
}

void reply(httplib::Response& res, int status, const Json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

int status_for(Errc code)
{
    switch (code) {
    case Errc::not_found:
    case Errc::unknown_tool: return 404;
    case Errc::wrong_phase: return 409;
    default: return 400;
    }
}

std::vector<Event> read_events_tolerant(const std::filesystem::path& file)
{
    std::vector<Event> out;
    if (!std::filesystem::exists(file)) return out;
    std::istringstream in(read_text_file(file));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) break;  // torn final line from an interrupted write
        out.push_back(event_from_json(j));
    }
    return out;
}

std::string sse_frame(const Event& e)
{
    return "id: " + std::to_string(e.seq) + "\nevent: " + e.kind + "\ndata: " + canonical(to_json(e)) + "\n\n";
}

} // namespace

Gateway::Gateway(GatewayConfig config) : config_(std::move(config))
{
    std::filesystem::create_directories(config_.data_dir / "sessions");
    executors_ = std::make_unique<ExecutorTable>();
    bind_builtin_executors(*executors_,
                           [this](const ExecContext& ctx) -> ToolFixtures& { return fixtures_for(ctx.session_id); });
    registry_ = std::make_unique<ToolRegistry>(*executors_, config_.data_dir / "manifests");
    register_builtins(*registry_);
    registry_->load_manifests();
    restore();
    server_ = std::make_unique<httplib::Server>();
    install_routes();
}

Gateway::~Gateway()
{
    stop();
}

ToolFixtures& Gateway::fixtures_for(const std::string& session_id)
{
    std::lock_guard lock(fixtures_mutex_);
    auto& slot = fixtures_[session_id];
    if (!slot) slot = std::make_shared<ToolFixtures>();
    return *slot;
}

void Gateway::restore()
{
    const auto index = config_.data_dir / "index.json";
    if (!std::filesystem::exists(index)) return;
    const Json j = read_json_file(index);
    for (const auto& s : j.value("sessions", Json::array())) {
        auto e = std::make_shared<Entry>();
        e->id = s.at("session_id").get<std::string>();
        e->objective = s.value("objective", "");
        e->created_at = s.value("created_at", "");
        if (s.contains("idempotency_key") && s["idempotency_key"].is_string()) {
            e->idempotency_key = s["idempotency_key"].get<std::string>();
            idempotency_[*e->idempotency_key] = e->id;
        }
        e->restored_events = read_events_tolerant(config_.data_dir / "sessions" / (e->id + ".ndjson"));
        sessions_[e->id] = e;
        order_.push_back(e->id);
    }
    created_ = order_.size();
}

void Gateway::persist_index()
{
    Json sessions = Json::array();
    for (const auto& id : order_) {
        const auto& e = sessions_.at(id);
        Json s{{"session_id", e->id}, {"objective", e->objective}, {"created_at", e->created_at}};
        if (e->idempotency_key) s["idempotency_key"] = *e->idempotency_key;
        sessions.push_back(s);
    }
    const auto index = config_.data_dir / "index.json";
    const auto tmp = config_.data_dir / "index.json.tmp";
    write_text_file(tmp, Json{{"sessions", sessions}}.dump(2) + "\n");
    std::filesystem::rename(tmp, index);
}

std::shared_ptr<Gateway::Entry> Gateway::find(const std::string& id) const
{
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

Json Gateway::handle(const Entry& e) const
{
    return Json{{"session_id", e.id},
                {"objective", e.objective},
                {"created_at", e.created_at},
                {"phase", e.phase()},
                {"read_only", e.session == nullptr}};
}

void Gateway::schedule(const std::shared_ptr<Entry>& e)
{
    if (e->worker.joinable()) e->worker.join();
    e->busy = true;
    e->worker = std::thread([e] {
        {
            std::lock_guard lock(e->run_mutex);
            e->session->run();
        }
        e->busy = false;
        e->notify();
    });
}

void Gateway::wait_idle()
{
    std::vector<std::shared_ptr<Entry>> entries;
    {
        std::lock_guard lock(mutex_);
        for (const auto& [_, e] : sessions_) entries.push_back(e);
    }
    for (const auto& e : entries)
        while (e->busy) std::this_thread::sleep_for(std::chrono::milliseconds(5));
}

void Gateway::install_routes()
{
    auto& svr = *server_;

    svr.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
        if (!config_.bearer_token) return httplib::Server::HandlerResponse::Unhandled;
        if (req.get_header_value("Authorization") == "Bearer " + *config_.bearer_token)
            return httplib::Server::HandlerResponse::Unhandled;
        reply(res, 401, error_body("unauthorized", "missing or wrong bearer token"));
        return httplib::Server::HandlerResponse::Handled;
    });

    svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const Error& e) {
            reply(res, status_for(e.code()), error_body(std::string(to_string(e.code())), e.detail()));
        } catch (const Json::exception& e) {
            reply(res, 400, error_body("malformed-json", e.what()));
        } catch (const std::exception& e) {
            reply(res, 500, error_body("internal", e.what()));
        }
    });

    svr.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
        const Json body = Json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object())
            return reply(res, 400, error_body("malformed-json", "request body must be a JSON object"));
        const std::string objective = body.value("objective", "");
        if (objective.find_first_not_of(" \t\r\n") == std::string::npos)
            return reply(res, 400, error_body("invalid-config", "objective must be a non-empty string"));
        const Json overrides = body.value("config", Json::object());
        if (!overrides.is_object()) return reply(res, 400, error_body("invalid-config", "config must be an object"));

        const std::string key = req.get_header_value("Idempotency-Key");
        std::lock_guard lock(mutex_);
        if (!key.empty()) {
            auto it = idempotency_.find(key);
            if (it != idempotency_.end()) return reply(res, 200, handle(*sessions_.at(it->second)));
        }

        SessionConfig sc = config_.session_defaults;
        BackendBinding binding = config_.backend;
        try {
            if (overrides.contains("seed")) sc.seed = overrides.at("seed").get<std::uint64_t>();
            if (overrides.contains("strict_citations")) sc.verification.strict = overrides.at("strict_citations").get<bool>();
            if (overrides.contains("protein_context_summary"))
                sc.protein_context_summary = overrides.at("protein_context_summary").get<std::string>();
            if (overrides.contains("fixtures")) binding.fixtures = overrides.at("fixtures").get<std::string>();
        } catch (const Json::exception& e) {
            return reply(res, 400, error_body("invalid-config", e.what()));
        }

        std::string id;
        do {
            id = sc.deterministic ? deterministic_session_id(sc.seed + created_, objective) : random_session_id();
            ++created_;
        } while (sessions_.count(id));

        std::unique_ptr<ChatBackend> backend;
        std::shared_ptr<ToolFixtures> tools;
        try {
            backend = make_backend(binding);
            if (binding.kind == BackendBinding::Kind::scripted) {
                const auto dir = std::filesystem::is_directory(binding.fixtures) ? binding.fixtures
                                                                                 : binding.fixtures.parent_path();
                if (std::filesystem::exists(dir / "tools.json"))
                    tools = std::make_shared<ToolFixtures>(ToolFixtures::load(dir / "tools.json"));
            }
        } catch (const Error& e) {
            return reply(res, 400, error_body("invalid-config", e.detail()));
        }
        {
            std::lock_guard fl(fixtures_mutex_);
            fixtures_[id] = tools ? tools : std::make_shared<ToolFixtures>();
        }

        sc.session_id = id;
        sc.record_file = config_.data_dir / "sessions" / (id + ".ndjson");
        sc.output_dir = config_.data_dir / "outputs" / id;
        auto e = std::make_shared<Entry>();
        e->id = id;
        e->objective = objective;
        e->created_at = WallClock().now();
        if (!key.empty()) {
            e->idempotency_key = key;
            idempotency_[key] = id;
        }
        e->session = std::make_unique<Session>(*registry_, *executors_, std::move(backend), sc, objective);
        std::weak_ptr<Entry> weak = e;
        e->session->record().subscribe([weak](const Event&) {
            if (auto p = weak.lock()) p->notify();
        });
        sessions_[id] = e;
        order_.push_back(id);
        persist_index();
        schedule(e);
        reply(res, 201, handle(*e));
    });

    svr.Get("/sessions", [this](const httplib::Request&, httplib::Response& res) {
        std::lock_guard lock(mutex_);
        Json out = Json::array();
        for (const auto& id : order_) out.push_back(handle(*sessions_.at(id)));
        reply(res, 200, out);
    });

    svr.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        auto e = find(req.matches[1]);
        if (!e) return reply(res, 404, error_body("not-found", "no session " + std::string(req.matches[1])));
        reply(res, 200, handle(*e));
    });

    svr.Get(R"(/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
        auto e = find(req.matches[1]);
        if (!e) return reply(res, 404, error_body("not-found", "no session " + std::string(req.matches[1])));
        std::optional<std::uint64_t> last;
        std::string resume = req.get_header_value("Last-Event-ID");
        if (resume.empty() && req.has_param("last_event_id")) resume = req.get_param_value("last_event_id");
        if (!resume.empty()) {
            try {
                std::size_t used = 0;
                last = std::stoull(resume, &used);
                if (used != resume.size()) throw std::invalid_argument(resume);
            } catch (const std::exception&) {
                return reply(res, 400, error_body("invalid-argument", "Last-Event-ID must be an event seq"));
            }
        }
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream", [this, e, last](std::size_t, httplib::DataSink& sink) mutable {
                if (stopping_) return false;
                std::uint64_t seen;
                {
                    std::lock_guard lock(e->wait_mutex);
                    seen = e->version;
                }
                const bool finished = e->finished();
                const auto events = e->events_after(last);
                for (const auto& ev : events) {
                    const std::string frame = sse_frame(ev);
                    if (!sink.write(frame.data(), frame.size())) return false;
                    last = ev.seq;
                }
                if (events.empty()) {
                    if (finished) {
                        sink.done();
                        return true;
                    }
                    std::unique_lock lock(e->wait_mutex);
                    e->appended.wait_for(lock, std::chrono::milliseconds(200),
                                         [&] { return e->version != seen || stopping_; });
                }
                return true;
            });
    });

    svr.Post(R"(/sessions/([^/]+)/clarification)", [this](const httplib::Request& req, httplib::Response& res) {
        auto e = find(req.matches[1]);
        if (!e) return reply(res, 404, error_body("not-found", "no session " + std::string(req.matches[1])));
        const Json body = Json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object() || !body.contains("answer") || !body["answer"].is_string() ||
            body["answer"].get<std::string>().empty())
            return reply(res, 400, error_body("invalid-argument", "body must be {\"answer\": \"...\"}"));
        if (!e->session) return reply(res, 409, error_body("wrong-phase", "restored sessions are read-only"));
        if (e->session->phase() != Phase::AwaitingClarification)
            return reply(res, 409, error_body("wrong-phase", "session is in " + e->phase()));
        {
            std::lock_guard lock(e->run_mutex);
            try {
                e->session->answer_clarification(body["answer"].get<std::string>());
            } catch (const Error& err) {
                return reply(res, status_for(err.code()), error_body(std::string(to_string(err.code())), err.detail()));
            }
        }
        schedule(e);
        reply(res, 202, Json{{"session_id", e->id}, {"phase", "Research"}});
    });

    svr.Get(R"(/sessions/([^/]+)/report)", [this](const httplib::Request& req, httplib::Response& res) {
        auto e = find(req.matches[1]);
        if (!e) return reply(res, 404, error_body("not-found", "no session " + std::string(req.matches[1])));
        if (e->session) {
            if (e->session->phase() != Phase::Done || !e->session->report()) {
                Json body = error_body("not-ready", "report is not ready");
                body["phase"] = e->phase();
                if (e->session->phase() == Phase::Failed) body["failure_reason"] = e->session->failure_reason();
                return reply(res, 409, body);
            }
            return reply(res, 200, to_json(*e->session->report()));
        }
        std::optional<Json> report;
        for (const auto& ev : e->restored_events)
            if (ev.kind == event_kind::report) report = ev.payload;
        if (!report || e->phase() != "Done") return reply(res, 409, error_body("not-ready", "report is not ready"));
        reply(res, 200, *report);
    });

    svr.Get(R"(/sessions/([^/]+)/record)", [this](const httplib::Request& req, httplib::Response& res) {
        auto e = find(req.matches[1]);
        if (!e) return reply(res, 404, error_body("not-found", "no session " + std::string(req.matches[1])));
        std::string text;
        for (const auto& ev : e->events_after(std::nullopt)) text += to_ndjson_line(ev);
        res.status = 200;
        res.set_content(text, "application/x-ndjson");
    });

    svr.Get("/tools", [this](const httplib::Request&, httplib::Response& res) {
        Json out = Json::array();
        for (const auto& t : registry_->list()) out.push_back(to_json(t));
        reply(res, 200, out);
    });

    svr.Get(R"(/tools/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string name = req.matches[1];
        const auto tool = registry_->find(name);
        if (!tool) return reply(res, 404, error_body("unknown-tool", "no tool " + name));
        Json out{{"tool", to_json(*tool)}};
        if (auto m = registry_->manifest(name)) out["manifest"] = to_json(*m);
        reply(res, 200, out);
    });

    svr.Post("/eval/runs", [this](const httplib::Request& req, httplib::Response& res) {
        const Json body = Json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object())
            return reply(res, 400, error_body("malformed-json", "request body must be a JSON object"));
        std::vector<eval::TaskInstance> instances;
        for (const auto& i : body.value("instances", Json::array())) instances.push_back(eval::instance_from_json(i));
        std::string responses;
        for (const auto& r : body.value("responses", Json::array())) responses += r.dump() + "\n";
        const eval::ResponseTable table = eval::parse_responses(responses);
        BackendBinding binding = config_.eval_backend.value_or(config_.backend);
        if (body.contains("fixtures")) binding.fixtures = body["fixtures"].get<std::string>();
        auto backend = make_backend(binding);
        eval::TournamentOptions options;
        options.seed = body.value("seed", std::uint64_t{0});
        const auto report = eval::run_evaluation(instances, table, *backend, *backend, options);
        Json out = eval::to_json(report);
        std::string id;
        {
            std::lock_guard lock(mutex_);
            id = "e-" + hex64(fnv1a(canonical(body), eval_runs_.size()));
            out["run_id"] = id;
            eval_runs_[id] = out;
        }
        write_text_file(config_.data_dir / "eval" / (id + ".json"), out.dump(2) + "\n");
        reply(res, 201, out);
    });

    svr.Get(R"(/eval/runs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        std::lock_guard lock(mutex_);
        auto it = eval_runs_.find(id);
        if (it != eval_runs_.end()) return reply(res, 200, it->second);
        const auto file = config_.data_dir / "eval" / (id + ".json");
        if (id.find("..") == std::string::npos && std::filesystem::exists(file))
            return reply(res, 200, read_json_file(file));
        reply(res, 404, error_body("not-found", "no eval run " + id));
    });
}

int Gateway::start()
{
    if (listener_.joinable()) return port_;
    if (config_.port == 0)
        port_ = server_->bind_to_any_port(config_.host);
    else
        port_ = server_->bind_to_port(config_.host, config_.port) ? config_.port : -1;
    if (port_ <= 0) throw Error(Errc::io, "cannot bind " + config_.host + ":" + std::to_string(config_.port));
    listener_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void Gateway::serve(const std::function<bool()>& should_stop)
{
    start();
    while (!stopping_ && !(should_stop && should_stop())) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    stop();
}

void Gateway::stop()
{
    if (stopping_.exchange(true)) return;
    std::vector<std::shared_ptr<Entry>> entries;
    {
        std::lock_guard lock(mutex_);
        for (const auto& [_, e] : sessions_) entries.push_back(e);
    }
    for (const auto& e : entries) e->notify();
    if (server_) server_->stop();
    if (listener_.joinable()) listener_.join();
    for (const auto& e : entries)
        if (e->worker.joinable()) e->worker.join();
}

} // namespace evoflow
