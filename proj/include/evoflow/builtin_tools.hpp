#pragma once

#include "evoflow/executors.hpp"
#include "evoflow/tool_registry.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace evoflow {

// Descriptors of every tool the engine ships with. Tools whose work happens in
// external services use the "fixture" executor and replay canned outputs.
std::vector<ToolDescriptor> builtin_catalog();
std::vector<SkillDoc> builtin_skills();

// Picks the canned outputs for a call, e.g. per session when one table serves many.
using FixtureSource = std::function<ToolFixtures&(const ExecContext&)>;

// Binds "fixture" plus the deterministic in-process executors.
void bind_builtin_executors(ExecutorTable& table, std::shared_ptr<ToolFixtures> fixtures);
void bind_builtin_executors(ExecutorTable& table, FixtureSource fixtures);

// Registers the catalog and the skills.
void register_builtins(ToolRegistry& registry);

// "Test accuracy: 0.8732" lines of a training log as {accuracy: 0.8732, ...}.
// Only metric names a manifest may carry are kept.
std::map<std::string, double> parse_training_metrics(std::string_view logs);

} // namespace evoflow
