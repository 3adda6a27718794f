#include "mars/json_extract.hpp"

#include "mars/errors.hpp"

namespace mars {

namespace {

// Span of the balanced object starting at `start`, honoring string literals
// and escapes. Returns npos when the braces never balance.
std::size_t find_balanced_end(std::string_view text, std::size_t start) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            --depth;
            if (depth == 0) return i;
        }
    }
    return std::string_view::npos;
}

} // namespace

nlohmann::json extract_first_json_object(std::string_view text) {
    for (std::size_t pos = text.find('{'); pos != std::string_view::npos;
         pos = text.find('{', pos + 1)) {
        const std::size_t end = find_balanced_end(text, pos);
        if (end == std::string_view::npos) continue;
        const std::string_view candidate = text.substr(pos, end - pos + 1);
        nlohmann::json parsed = nlohmann::json::parse(candidate, nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) return parsed;
    }
    throw MalformedPayload("no well-formed JSON object found in completion");
}

} // namespace mars
