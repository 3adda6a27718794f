#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mars {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);

// Splits on runs of whitespace; no empty pieces.
std::vector<std::string> split_whitespace(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(std::span<const std::string> parts, std::string_view sep);

// First `max_bytes` of `s`, never cutting a UTF-8 sequence in half.
std::string_view clip_utf8(std::string_view s, std::size_t max_bytes);

// ASCII-lowercased, trimmed, inner whitespace collapsed to single spaces.
std::string normalize_ws(std::string_view s);

std::uint64_t fnv1a64(std::string_view s);

} // namespace mars
