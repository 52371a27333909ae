#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

namespace microtune {

enum class ParamKind { Boolean, Discrete, Byte, Categorical };
enum class RenderTarget { RuntimeFlag, ContainerFlag, EnvironmentVariable };

std::string_view to_string(ParamKind kind);
std::string_view to_string(RenderTarget target);

/// bool for Boolean, int64 for Discrete and Byte, string for Categorical.
using ParamValue = std::variant<bool, std::int64_t, std::string>;

/// How a chosen value turns into a flag or environment entry.
struct RenderRule {
    RenderTarget target = RenderTarget::RuntimeFlag;
    std::string value_template;  // non-Boolean; exactly one "{value}"
    std::string on_template;     // Boolean only; empty emits nothing
    std::string off_template;
};

struct ParameterSpec {
    std::string name;
    ParamKind kind = ParamKind::Categorical;
    std::vector<ParamValue> values;
    std::size_t default_index = 0;
    RenderRule render;
    bool enabled = true;

    const ParamValue& default_value() const { return values.at(default_index); }
    std::optional<std::size_t> position_of(const ParamValue& value) const;
};

/// Human-readable value text; Byte values use binary suffixes.
std::string value_text(ParamKind kind, const ParamValue& value);
nlohmann::json value_to_json(const ParamValue& value);

/// Typed value from a JSON scalar. Byte accepts integers or suffix strings.
ParamValue value_from_json(ParamKind kind, const nlohmann::json& j);
/// Typed value from an object key ("true", "4", "512m", "g1").
ParamValue value_from_key(ParamKind kind, std::string_view key);

/// One value per parameter, kept in the owning space's declaration order.
class Configuration {
public:
    using Entry = std::pair<std::string, ParamValue>;

    Configuration() = default;
    explicit Configuration(std::vector<Entry> entries) : entries_(std::move(entries)) {}

    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    const ParamValue* find(std::string_view name) const;
    const ParamValue& at(std::string_view name) const;

    friend bool operator==(const Configuration&, const Configuration&) = default;

private:
    std::vector<Entry> entries_;
};

struct RenderedConfig {
    std::vector<std::string> runtime_flags;
    std::vector<std::string> container_flags;
    std::map<std::string, std::string> environment;
};

/// A bounded, typed, ordered parameter universe. Immutable once built.
class SearchSpace {
public:
    /// Validates every invariant; throws SpaceError naming the offending parameter.
    SearchSpace(std::string name, std::vector<ParameterSpec> parameters);

    const std::string& name() const noexcept { return name_; }
    const std::vector<ParameterSpec>& parameters() const noexcept { return parameters_; }
    const ParameterSpec* find(std::string_view name) const;
    std::optional<std::size_t> position_of(std::string_view name) const;

    /// Product of |values| over enabled parameters; 1 when none are enabled.
    /// Spaces whose product overflows 64 bits are rejected at construction.
    std::uint64_t cardinality() const { return cardinality_; }

    /// Mixed-radix decode. First enabled parameter is most significant, the last
    /// varies fastest; disabled parameters carry their default.
    Configuration config_at(std::uint64_t index) const;

    /// Exact inverse of config_at. Throws SpaceError for missing, extra, or
    /// inadmissible values (including a non-default value on a disabled parameter).
    std::uint64_t index_of(const Configuration& config) const;

    /// Per-parameter value positions, declaration order.
    std::vector<std::size_t> value_positions(const Configuration& config) const;

    Configuration defaults() const;

    /// Reorders into declaration order and validates. Throws SpaceError.
    Configuration normalize(const Configuration& config) const;
    Configuration configuration_from_json(const nlohmann::json& j) const;

    RenderedConfig render(const Configuration& config) const;

    /// Copy with exactly `names` enabled. Unknown names throw SpaceError.
    SearchSpace with_enabled(std::span<const std::string> names) const;

    nlohmann::json to_json() const;

private:
    std::string name_;
    std::vector<ParameterSpec> parameters_;
    std::uint64_t cardinality_ = 1;
};

nlohmann::json configuration_to_json(const Configuration& config);

/// Parses the search-space JSON document.
SearchSpace parse_space(const nlohmann::json& document);
SearchSpace parse_space_text(std::string_view text);
SearchSpace load_space_file(const std::string& path);

}  // namespace microtune
