#pragma once

#include "evoflow/agent.hpp"
#include "evoflow/executors.hpp"
#include "evoflow/orchestrator.hpp"
#include "evoflow/tool_registry.hpp"

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace evoflow {

struct GatewayConfig {
    std::string host = "127.0.0.1";
    int port = 0;  // 0 picks a free port
    std::filesystem::path data_dir = "evoflow_data";
    std::optional<std::string> bearer_token;
    // Chat backend for sessions. A scripted binding's directory may also hold
    // tools.json with canned tool outputs.
    BackendBinding backend;
    // Analyst/judge backend for POST /eval/runs; sessions' binding when unset.
    std::optional<BackendBinding> eval_backend;
    SessionConfig session_defaults;
};

// HTTP front end over sessions, the tool registry and evaluation runs. Session
// events are persisted as NDJSON under data_dir/sessions with data_dir/index.json
// mapping ids; sessions found there at startup are served read-only.
class Gateway {
public:
    explicit Gateway(GatewayConfig config);
    ~Gateway();
    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    // Binds and serves on a background thread. Returns the bound port.
    int start();
    // Serves until should_stop() returns true (polled every 100 ms) or stop() runs.
    void serve(const std::function<bool()>& should_stop = {});
    void stop();
    int port() const { return port_; }

    ToolRegistry& registry() { return *registry_; }
    // Blocks until every scheduled session run has returned.
    void wait_idle();

private:
    struct Entry;

    void install_routes();
    void restore();
    void persist_index();
    std::shared_ptr<Entry> find(const std::string& id) const;
    void schedule(const std::shared_ptr<Entry>& entry);
    ToolFixtures& fixtures_for(const std::string& session_id);
    Json handle(const Entry& entry) const;

    GatewayConfig config_;
    std::unique_ptr<ExecutorTable> executors_;
    std::unique_ptr<ToolRegistry> registry_;
    std::unique_ptr<httplib::Server> server_;
    std::thread listener_;
    int port_ = 0;
    std::atomic<bool> stopping_{false};

    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::vector<std::string> order_;  // creation order
    std::map<std::string, std::string> idempotency_;  // key -> session id
    std::map<std::string, std::shared_ptr<ToolFixtures>> fixtures_;
    std::map<std::string, Json> eval_runs_;
    std::uint64_t created_ = 0;
    std::mutex fixtures_mutex_;
};

} // namespace evoflow
