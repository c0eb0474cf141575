#include "evoflow/json.hpp"

#include "evoflow/error.hpp"

#include <fstream>
#include <sstream>

namespace evoflow {

std::string hex64(std::uint64_t value)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

std::string strip_code_fences(std::string_view text)
{
    auto trim = [](std::string_view s) {
        auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string_view::npos)
            return std::string_view{};
        auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    };
    auto body = trim(text);
    if (body.substr(0, 3) != "```")
        return std::string(body);
    auto first_newline = body.find('\n');
    if (first_newline == std::string_view::npos)
        return std::string(body);
    body.remove_prefix(first_newline + 1);
    auto closing = body.rfind("```");
    if (closing != std::string_view::npos)
        body = body.substr(0, closing);
    return std::string(trim(body));
}

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::io, "cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(Errc::io, "cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

Json read_json_file(const std::filesystem::path& path)
{
    auto text = read_text_file(path);
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw Error(Errc::malformed_json, path.string() + ": " + e.what());
    }
}

} // namespace evoflow
