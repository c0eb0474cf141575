#pragma once

#include "evoflow/agent.hpp"
#include "evoflow/builtin_tools.hpp"
#include "evoflow/executors.hpp"
#include "evoflow/orchestrator.hpp"
#include "evoflow/tool_registry.hpp"

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>
#include <unistd.h>

namespace evoflow::testing {

inline std::filesystem::path fixture(const std::string& rel)
{
    return std::filesystem::path(EVOFLOW_FIXTURES_DIR) / rel;
}

// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t")
    {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("evoflow-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

// A registry, executor table and session wired to one scripted fixture directory.
// Members are declared in construction order: the registry refers to the table.
struct Scenario {
    ExecutorTable executors;
    std::unique_ptr<ToolRegistry> registry;
    std::unique_ptr<Session> session;

    Scenario(const std::string& name, const std::string& objective, SessionConfig config,
             std::optional<std::filesystem::path> manifests_dir = {})
    {
        const auto dir = fixture(name);
        auto tools = std::make_shared<ToolFixtures>();
        if (std::filesystem::exists(dir / "tools.json"))
            tools = std::make_shared<ToolFixtures>(ToolFixtures::load(dir / "tools.json"));
        bind_builtin_executors(executors, tools);
        registry = std::make_unique<ToolRegistry>(executors, manifests_dir);
        register_builtins(*registry);
        auto backend = std::make_unique<ScriptedBackend>(ScriptedBackend::load(dir / "chat.json"));
        session = std::make_unique<Session>(*registry, executors, std::move(backend), std::move(config), objective);
    }
};

inline SessionConfig scenario_config(const std::filesystem::path& out, bool with_record = true)
{
    SessionConfig c;
    c.output_dir = out / "outputs";
    if (with_record) c.record_file = out / "run_record.ndjson";
    return c;
}

} // namespace evoflow::testing
