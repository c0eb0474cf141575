#include "evoflow/run_record.hpp"

#include "evoflow/error.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <sstream>

namespace evoflow {

std::string format_utc(std::int64_t epoch_seconds)
{
    const std::time_t t = static_cast<std::time_t>(epoch_seconds);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string LogicalClock::now()
{
    std::scoped_lock lock(mutex_);
    return format_utc(next_++);
}

std::string WallClock::now()
{
    const auto s = std::chrono::duration_cast<std::chrono::seconds>(
        std::chrono::system_clock::now().time_since_epoch());
    return format_utc(s.count());
}

std::string deterministic_session_id(std::uint64_t seed, std::string_view objective)
{
    return "s-" + hex64(fnv1a(objective, fnv1a(std::to_string(seed))));
}

std::string random_session_id()
{
    std::random_device rd;
    const std::uint64_t v = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    return "s-" + hex64(v);
}

Json to_json(const Event& e)
{
    return Json{{"seq", e.seq}, {"at", e.at},           {"kind", e.kind},
                {"session_id", e.session_id}, {"phase", e.phase}, {"payload", e.payload}};
}

Event event_from_json(const Json& j)
{
    try {
        Event e;
        e.seq = j.at("seq").get<std::uint64_t>();
        e.at = j.at("at").get<std::string>();
        e.kind = j.at("kind").get<std::string>();
        e.session_id = j.at("session_id").get<std::string>();
        e.phase = j.at("phase").get<std::string>();
        e.payload = j.value("payload", Json::object());
        return e;
    } catch (const Json::exception& ex) {
        throw Error(Errc::malformed_record, std::string("event: ") + ex.what());
    }
}

std::string to_ndjson_line(const Event& event)
{
    return canonical(to_json(event)) + "\n";
}

std::vector<Event> parse_ndjson_events(std::string_view text)
{
    std::vector<Event> out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) throw Error(Errc::malformed_record, "line " + std::to_string(n) + " is not JSON");
        out.push_back(event_from_json(j));
    }
    return out;
}

RunRecord::RunRecord(std::string session_id, Clock& clock, std::optional<std::filesystem::path> file)
    : session_id_(std::move(session_id)), clock_(clock), file_(std::move(file))
{
    if (file_) {
        if (file_->has_parent_path()) std::filesystem::create_directories(file_->parent_path());
        std::ofstream(*file_, std::ios::trunc);
    }
}

const Event& RunRecord::append(const std::string& kind, const std::string& phase, Json payload)
{
    std::scoped_lock lock(mutex_);
    Event e;
    e.seq = events_.size();
    e.at = clock_.now();
    e.kind = kind;
    e.session_id = session_id_;
    e.phase = phase;
    e.payload = std::move(payload);
    if (file_) {
        std::ofstream out(*file_, std::ios::app | std::ios::binary);
        out << to_ndjson_line(e);
        out.flush();
        if (!out) throw Error(Errc::io, "cannot append to " + file_->string());
    }
    events_.push_back(std::move(e));
    for (const auto& listener : listeners_) listener(events_.back());
    return events_.back();
}

std::vector<Event> RunRecord::events() const
{
    std::scoped_lock lock(mutex_);
    return events_;
}

std::vector<Event> RunRecord::events_after(std::optional<std::uint64_t> last_seq) const
{
    std::scoped_lock lock(mutex_);
    const std::size_t from = last_seq ? static_cast<std::size_t>(*last_seq + 1) : 0;
    if (from >= events_.size()) return {};
    return {events_.begin() + static_cast<std::ptrdiff_t>(from), events_.end()};
}

std::size_t RunRecord::size() const
{
    std::scoped_lock lock(mutex_);
    return events_.size();
}

std::string RunRecord::ndjson() const
{
    std::scoped_lock lock(mutex_);
    std::string out;
    for (const auto& e : events_) out += to_ndjson_line(e);
    return out;
}

void RunRecord::subscribe(Listener listener)
{
    std::scoped_lock lock(mutex_);
    listeners_.push_back(std::move(listener));
}

std::vector<AuditFinding> audit_run_record(const std::vector<Event>& events, const RetryPolicy& policy)
{
    std::vector<AuditFinding> out;
    auto fail = [&](const char* check, std::string msg) { out.push_back({check, std::move(msg)}); };

    std::set<int> instructed;
    std::map<int, int> invocations;
    bool implementation_started = false;
    std::vector<std::string> last_history;
    std::size_t reference_count = 0;
    const int bound = 1 + policy.max_self_debug_retries + policy.max_empty_search_retries;

    for (std::size_t i = 0; i < events.size(); ++i) {
        const Event& e = events[i];
        if (e.seq != i) fail("seq", "event " + std::to_string(i) + " has seq " + std::to_string(e.seq));
        const Json& p = e.payload;
        if (e.kind == event_kind::phase_change) {
            if (p.value("to", "") == "Implementation") implementation_started = true;
        } else if (e.kind == event_kind::cb_instruction) {
            instructed.insert(p.value("step", 0));
        } else if (e.kind == event_kind::tool_invocation) {
            const int step = p.value("step", 0);
            if (!implementation_started)
                fail("phase-order", "tool invocation at seq " + std::to_string(e.seq) + " precedes Implementation");
            if (!instructed.count(step))
                fail("cb-gate", "step " + std::to_string(step) + " executed without a CB instruction");
            if (++invocations[step] > bound)
                fail("retry-bound", "step " + std::to_string(step) + " exceeded " + std::to_string(bound) +
                                        " attempts");
        } else if (e.kind == event_kind::tool_result && p.value("final", false)) {
            std::vector<std::string> history;
            for (const auto& h : p.value("history", Json::array())) history.push_back(h.get<std::string>());
            const bool prefix = history.size() >= last_history.size() &&
                                std::equal(last_history.begin(), last_history.end(), history.begin());
            if (!prefix) fail("history-monotone", "history at seq " + std::to_string(e.seq) + " rewrote earlier entries");
            last_history = std::move(history);
        } else if (e.kind == event_kind::report) {
            reference_count = p.value("references", Json::array()).size();
        } else if (e.kind == event_kind::audit) {
            const std::string text = p.value("final_text", "");
            for (int n : cited_indices(text))
                if (n < 1 || static_cast<std::size_t>(n) > reference_count)
                    fail("citations", "report cites [" + std::to_string(n) + "] with " +
                                          std::to_string(reference_count) + " references");
        }
    }
    return out;
}

std::vector<int> cited_indices(std::string_view text)
{
    static const std::regex group(R"(\[(\d+(?:\s*(?:,|-|–)\s*\d+)*)\])");
    static const std::regex number(R"(\d+)");
    std::vector<int> out;
    const std::string s(text);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), group); it != std::sregex_iterator(); ++it) {
        const std::string inner = (*it)[1].str();
        std::vector<int> nums;
        std::vector<bool> range_before;
        std::size_t prev_end = 0;
        for (auto n = std::sregex_iterator(inner.begin(), inner.end(), number); n != std::sregex_iterator(); ++n) {
            const std::string gap = inner.substr(prev_end, static_cast<std::size_t>(n->position()) - prev_end);
            range_before.push_back(gap.find('-') != std::string::npos || gap.find("\xE2\x80\x93") != std::string::npos);
            nums.push_back(std::stoi(n->str()));
            prev_end = static_cast<std::size_t>(n->position() + n->length());
        }
        for (std::size_t k = 0; k < nums.size(); ++k) {
            if (k > 0 && range_before[k] && nums[k] > nums[k - 1] && nums[k] - nums[k - 1] < 1000) {
                for (int v = nums[k - 1] + 1; v <= nums[k]; ++v) out.push_back(v);
            } else {
                out.push_back(nums[k]);
            }
        }
    }
    return out;
}

} // namespace evoflow
