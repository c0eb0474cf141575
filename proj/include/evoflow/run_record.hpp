#pragma once

#include "evoflow/json.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace evoflow {

// Source of timestamps for run records.
class Clock {
public:
    virtual ~Clock() = default;
    virtual std::string now() = 0;
};

// Fixed epoch advanced one second per reading, so scripted replays are byte-identical.
class LogicalClock : public Clock {
public:
    explicit LogicalClock(std::int64_t epoch_seconds = 1767225600) : next_(epoch_seconds) {}
    std::string now() override;

private:
    std::mutex mutex_;
    std::int64_t next_;
};

class WallClock : public Clock {
public:
    std::string now() override;
};

// ISO-8601 UTC, second resolution.
std::string format_utc(std::int64_t epoch_seconds);

// "s-" followed by 16 hex digits derived from seed and objective.
std::string deterministic_session_id(std::uint64_t seed, std::string_view objective);
std::string random_session_id();

namespace event_kind {
inline constexpr const char* phase_change = "phase_change";
inline constexpr const char* prompt = "prompt";
inline constexpr const char* response = "response";
inline constexpr const char* cb_instruction = "cb_instruction";
inline constexpr const char* tool_invocation = "tool_invocation";
inline constexpr const char* tool_result = "tool_result";
inline constexpr const char* retry = "retry";
inline constexpr const char* clarification_request = "clarification_request";
inline constexpr const char* clarification_answer = "clarification_answer";
inline constexpr const char* report = "report";
inline constexpr const char* audit = "audit";
} // namespace event_kind

struct Event {
    std::uint64_t seq = 0;
    std::string at;
    std::string kind;
    std::string session_id;
    std::string phase;
    Json payload = Json::object();

    bool operator==(const Event&) const = default;
};

Json to_json(const Event& event);
Event event_from_json(const Json& j);
// One compact JSON object per line, keys sorted.
std::string to_ndjson_line(const Event& event);
std::vector<Event> parse_ndjson_events(std::string_view text);

// Append-only event log for one session. Sequence numbers start at 0 and are
// gapless. When a file is attached every event is appended and flushed.
class RunRecord {
public:
    using Listener = std::function<void(const Event&)>;

    RunRecord(std::string session_id, Clock& clock, std::optional<std::filesystem::path> file = {});

    const Event& append(const std::string& kind, const std::string& phase, Json payload);
    std::vector<Event> events() const;
    std::vector<Event> events_after(std::optional<std::uint64_t> last_seq) const;
    std::size_t size() const;
    const std::string& session_id() const { return session_id_; }
    std::string ndjson() const;
    // Listeners run after the event is stored, under the append lock, so they
    // observe events in sequence order.
    void subscribe(Listener listener);

private:
    std::string session_id_;
    Clock& clock_;
    std::optional<std::filesystem::path> file_;
    mutable std::mutex mutex_;
    std::vector<Event> events_;
    std::vector<Listener> listeners_;
};

struct RetryPolicy {
    int max_self_debug_retries = 2;
    int max_empty_search_retries = 2;
    bool escalate_to_cb = true;
};

struct AuditFinding {
    std::string check;  // "cb-gate", "retry-bound", "history-monotone", "citations", "phase-order", "seq"
    std::string message;
};

// Protocol audit over a run record:
//   cb-gate: every tool_invocation of a step follows a cb_instruction for that step
//   retry-bound: attempts per step <= 1 + max_self_debug_retries + max_empty_search_retries
//   history-monotone: each history snapshot extends the previous one
//   citations: every [n] in an audited report indexes a collected reference
//   phase-order: no tool_invocation before Research completes
//   seq: sequence numbers are 0..n-1
// Citation indices in prose: [1], [1, 2], [1-3] and [1]–[3] style groups.
std::vector<int> cited_indices(std::string_view text);

std::vector<AuditFinding> audit_run_record(const std::vector<Event>& events, const RetryPolicy& policy = {});

} // namespace evoflow
