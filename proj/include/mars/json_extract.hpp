#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace mars {

// Returns the first well-formed JSON object embedded in `text`. Tolerates
// fenced code blocks, surrounding prose, and trailing junk: every '{' is
// treated as a candidate start and the first balanced span that parses wins.
// Throws MalformedPayload when no object can be extracted.
nlohmann::json extract_first_json_object(std::string_view text);

} // namespace mars
