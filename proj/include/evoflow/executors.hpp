#pragma once

#include "evoflow/json.hpp"

#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <string_view>

namespace evoflow {

class ToolRegistry;
class Clock;

// Per-call context handed to executors.
struct ExecContext {
    std::string tool_name;
    std::string session_id;
    std::filesystem::path output_dir;
    ToolRegistry* registry = nullptr;
    Clock* clock = nullptr;
};

using ExecutorFn = std::function<Json(const Json& args, const ExecContext& ctx)>;

// Canned tool outputs consumed in order per tool name. Strings "${fixtures}"
// inside outputs are replaced by the fixture directory.
class ToolFixtures {
public:
    ToolFixtures() = default;
    ToolFixtures(const ToolFixtures& other);
    ToolFixtures& operator=(const ToolFixtures& other);
    static ToolFixtures load(const std::filesystem::path& file);
    static ToolFixtures from_json(const Json& entries, const std::filesystem::path& base_dir = {});

    void push(const std::string& tool, Json output);
    // Throws scripted-fixture-exhausted.
    Json next(const std::string& tool);
    bool has(const std::string& tool) const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::deque<Json>> queues_;
};

// Maps executor binding keys to implementations. Also tracks checkpoints that
// trainers produced during this process so manifests can reference them.
class ExecutorTable {
public:
    void bind(const std::string& key, ExecutorFn fn);
    bool contains(std::string_view key) const;
    Json run(std::string_view key, const Json& args, const ExecContext& ctx) const;

    void add_checkpoint(const std::string& ref);
    // A checkpoint resolves when it exists on disk or a trainer reported it.
    bool resolves_checkpoint(std::string_view ref) const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, ExecutorFn, std::less<>> fns_;
    std::set<std::string, std::less<>> checkpoints_;
};

} // namespace evoflow
