#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace microtune {

/// Parses `<digits>[b|k|m|g]` (case-insensitive, 1024-based). Throws SpaceError on
/// malformed text, zero, or overflow.
std::uint64_t parse_byte_size(std::string_view text);

/// Formats with the largest binary suffix that divides exactly ("512m", "1g"),
/// otherwise plain bytes. Throws SpaceError on zero.
std::string format_byte_size(std::uint64_t bytes);

}  // namespace microtune
