#include "microtune/byte_size.hpp"

#include <array>
#include <cctype>
#include <limits>

#include "microtune/errors.hpp"

namespace microtune {

namespace {

constexpr std::uint64_t kKiB = 1024;

std::uint64_t suffix_multiplier(char c) {
    switch (std::tolower(static_cast<unsigned char>(c))) {
    case 'b': return 1;
    case 'k': return kKiB;
    case 'm': return kKiB * kKiB;
    case 'g': return kKiB * kKiB * kKiB;
    default: return 0;
    }
}

}  // namespace

std::uint64_t parse_byte_size(std::string_view text) {
    if (text.empty())
        throw SpaceError("malformed byte size: empty");

    std::uint64_t multiplier = 1;
    std::string_view digits = text;
    if (!std::isdigit(static_cast<unsigned char>(text.back()))) {
        multiplier = suffix_multiplier(text.back());
        if (multiplier == 0)
            throw SpaceError("malformed byte size '" + std::string(text) + "'");
        digits.remove_suffix(1);
    }
    if (digits.empty())
        throw SpaceError("malformed byte size '" + std::string(text) + "'");

    constexpr auto kMax = std::numeric_limits<std::int64_t>::max();
    std::uint64_t value = 0;
    for (char c : digits) {
        if (!std::isdigit(static_cast<unsigned char>(c)))
            throw SpaceError("malformed byte size '" + std::string(text) + "'");
        value = value * 10 + static_cast<std::uint64_t>(c - '0');
        if (value > static_cast<std::uint64_t>(kMax))
            throw SpaceError("byte size out of range '" + std::string(text) + "'");
    }
    if (value == 0)
        throw SpaceError("byte size must be positive: '" + std::string(text) + "'");
    if (value > static_cast<std::uint64_t>(kMax) / multiplier)
        throw SpaceError("byte size out of range '" + std::string(text) + "'");
    return value * multiplier;
}

std::string format_byte_size(std::uint64_t bytes) {
    if (bytes == 0)
        throw SpaceError("byte size must be positive");
    static constexpr std::array<std::pair<std::uint64_t, char>, 3> kUnits{{
        {kKiB * kKiB * kKiB, 'g'},
        {kKiB * kKiB, 'm'},
        {kKiB, 'k'},
    }};
    for (const auto& [unit, suffix] : kUnits) {
        if (bytes % unit == 0)
            return std::to_string(bytes / unit) + suffix;
    }
    return std::to_string(bytes);
}

}  // namespace microtune
