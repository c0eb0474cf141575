#pragma once

#include <httplib.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace evoflow::testing {

struct SseEvent {
    std::uint64_t id = 0;
    std::string event;
    std::string data;
};

struct SseRead {
    std::vector<SseEvent> events;
    bool completed = false;  // server closed the stream on its own
    int status = 0;
};

// Reads a text/event-stream. With `drop_after`, the client hangs up after that
// many events, which looks like a dropped connection to the server.
inline SseRead read_sse(httplib::Client& client, const std::string& path, std::optional<std::uint64_t> last_id,
                        std::optional<std::size_t> drop_after = std::nullopt)
{
    SseRead out;
    std::string buffer;
    httplib::Headers headers;
    if (last_id) headers.emplace("Last-Event-ID", std::to_string(*last_id));

    auto flush_frames = [&]() -> bool {
        std::size_t end;
        while ((end = buffer.find("\n\n")) != std::string::npos) {
            const std::string frame = buffer.substr(0, end);
            buffer.erase(0, end + 2);
            SseEvent e;
            std::size_t pos = 0;
            while (pos <= frame.size()) {
                std::size_t nl = frame.find('\n', pos);
                if (nl == std::string::npos) nl = frame.size();
                const std::string line = frame.substr(pos, nl - pos);
                pos = nl + 1;
                const auto colon = line.find(':');
                if (colon == std::string::npos) continue;
                std::string value = line.substr(colon + 1);
                if (!value.empty() && value[0] == ' ') value.erase(0, 1);
                const std::string field = line.substr(0, colon);
                if (field == "id") e.id = std::stoull(value);
                else if (field == "event") e.event = value;
                else if (field == "data") e.data += value;
            }
            out.events.push_back(std::move(e));
            if (drop_after && out.events.size() >= *drop_after) return false;
        }
        return true;
    };

    auto result = client.Get(
        path, headers,
        [&](const httplib::Response& response) {
            out.status = response.status;
            return true;
        },
        [&](const char* data, std::size_t len) {
            buffer.append(data, len);
            return flush_frames();
        });
    out.completed = static_cast<bool>(result) && !(drop_after && out.events.size() >= *drop_after);
    if (result && out.status == 0) out.status = result->status;
    return out;
}

} // namespace evoflow::testing
