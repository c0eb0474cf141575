#include "evoflow/executors.hpp"

#include "evoflow/error.hpp"

namespace evoflow {

namespace {

void substitute_placeholder(Json& node, const std::string& base)
{
    static const std::string kToken = "${fixtures}";
    if (node.is_string()) {
        auto s = node.get<std::string>();
        for (auto pos = s.find(kToken); pos != std::string::npos; pos = s.find(kToken, pos + base.size()))
            s.replace(pos, kToken.size(), base);
        node = s;
    } else if (node.is_structured()) {
        for (auto& child : node) substitute_placeholder(child, base);
    }
}

} // namespace

ToolFixtures ToolFixtures::load(const std::filesystem::path& file)
{
    return from_json(read_json_file(file), std::filesystem::absolute(file).parent_path());
}

ToolFixtures ToolFixtures::from_json(const Json& entries, const std::filesystem::path& base_dir)
{
    if (!entries.is_array()) throw Error(Errc::malformed_json, "tool fixtures must be a JSON array");
    ToolFixtures out;
    const std::string base = base_dir.empty() ? std::string(".") : base_dir.generic_string();
    for (const auto& e : entries) {
        if (!e.is_object() || !e.contains("tool") || !e["tool"].is_string() || !e.contains("output"))
            throw Error(Errc::malformed_json, "tool fixture entries need 'tool' and 'output'");
        Json output = e["output"];
        substitute_placeholder(output, base);
        out.push(e["tool"].get<std::string>(), std::move(output));
    }
    return out;
}

ToolFixtures::ToolFixtures(const ToolFixtures& other)
{
    std::lock_guard lock(other.mutex_);
    queues_ = other.queues_;
}

ToolFixtures& ToolFixtures::operator=(const ToolFixtures& other)
{
    if (this == &other) return *this;
    std::scoped_lock lock(mutex_, other.mutex_);
    queues_ = other.queues_;
    return *this;
}

void ToolFixtures::push(const std::string& tool, Json output)
{
    std::lock_guard lock(mutex_);
    queues_[tool].push_back(std::move(output));
}

Json ToolFixtures::next(const std::string& tool)
{
    std::lock_guard lock(mutex_);
    auto it = queues_.find(tool);
    if (it == queues_.end() || it->second.empty())
        throw Error(Errc::fixture_exhausted, "no scripted output left for tool '" + tool + "'");
    Json out = std::move(it->second.front());
    it->second.pop_front();
    return out;
}

bool ToolFixtures::has(const std::string& tool) const
{
    std::lock_guard lock(mutex_);
    auto it = queues_.find(tool);
    return it != queues_.end() && !it->second.empty();
}

void ExecutorTable::bind(const std::string& key, ExecutorFn fn)
{
    std::lock_guard lock(mutex_);
    fns_[key] = std::move(fn);
}

bool ExecutorTable::contains(std::string_view key) const
{
    std::lock_guard lock(mutex_);
    return fns_.find(key) != fns_.end();
}

Json ExecutorTable::run(std::string_view key, const Json& args, const ExecContext& ctx) const
{
    ExecutorFn fn;
    {
        std::lock_guard lock(mutex_);
        auto it = fns_.find(key);
        if (it == fns_.end()) throw Error(Errc::unknown_executor, "executor '" + std::string(key) + "'");
        fn = it->second;
    }
    return fn(args, ctx);
}

void ExecutorTable::add_checkpoint(const std::string& ref)
{
    std::lock_guard lock(mutex_);
    checkpoints_.insert(ref);
}

bool ExecutorTable::resolves_checkpoint(std::string_view ref) const
{
    {
        std::lock_guard lock(mutex_);
        if (checkpoints_.find(ref) != checkpoints_.end()) return true;
    }
    std::error_code ec;
    return !ref.empty() && std::filesystem::exists(std::filesystem::path(std::string(ref)), ec);
}

} // namespace evoflow
