#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace evoflow {

using Json = nlohmann::json;

// Compact dump with sorted keys; stable across runs.
inline std::string canonical(const Json& value)
{
    return value.dump(-1, ' ', false, Json::error_handler_t::replace);
}

// 64-bit FNV-1a, used for cache keys and deterministic ids.
inline std::uint64_t fnv1a(std::string_view text, std::uint64_t seed = 0xcbf29ce484222325ULL)
{
    std::uint64_t h = seed;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value);

// Strips an optional markdown code fence (```json ... ```) around a payload.
std::string strip_code_fences(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);
Json read_json_file(const std::filesystem::path& path);

} // namespace evoflow
