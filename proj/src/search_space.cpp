#include "microtune/search_space.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "microtune/byte_size.hpp"
#include "microtune/errors.hpp"

namespace microtune {

using nlohmann::json;

namespace {

constexpr std::string_view kPlaceholder = "{value}";

[[noreturn]] void fail(const std::string& param, const std::string& what) {
    throw SpaceError("parameter '" + param + "': " + what);
}

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string_view::npos;
         pos = text.find(needle, pos + needle.size()))
        ++n;
    return n;
}

ParamKind parse_kind(const std::string& s, const std::string& param) {
    if (s == "boolean") return ParamKind::Boolean;
    if (s == "discrete") return ParamKind::Discrete;
    if (s == "byte") return ParamKind::Byte;
    if (s == "categorical") return ParamKind::Categorical;
    fail(param, "unknown kind '" + s + "'");
}

RenderTarget parse_target(const std::string& s, const std::string& param) {
    if (s == "runtime-flag") return RenderTarget::RuntimeFlag;
    if (s == "container-flag") return RenderTarget::ContainerFlag;
    if (s == "environment-variable") return RenderTarget::EnvironmentVariable;
    fail(param, "unknown render target '" + s + "'");
}

bool kind_accepts(ParamKind kind, const ParamValue& v) {
    switch (kind) {
    case ParamKind::Boolean: return std::holds_alternative<bool>(v);
    case ParamKind::Discrete: return std::holds_alternative<std::int64_t>(v);
    case ParamKind::Byte:
        return std::holds_alternative<std::int64_t>(v) && std::get<std::int64_t>(v) > 0;
    case ParamKind::Categorical: return std::holds_alternative<std::string>(v);
    }
    return false;
}

void validate_env_template(const std::string& param, const std::string& tmpl) {
    if (tmpl.empty())
        return;
    auto eq = tmpl.find('=');
    if (eq == std::string::npos || eq == 0)
        fail(param, "environment-variable template must look like NAME=...");
}

void validate_parameter(const ParameterSpec& p) {
    if (p.name.empty())
        throw SpaceError("parameter with empty name");
    if (p.values.empty())
        fail(p.name, "values must be non-empty");
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        if (!kind_accepts(p.kind, p.values[i]))
            fail(p.name, "value " + std::to_string(i) + " does not match kind " +
                             std::string(to_string(p.kind)));
        for (std::size_t j = 0; j < i; ++j) {
            if (p.values[j] == p.values[i])
                fail(p.name, "duplicate value '" + value_text(p.kind, p.values[i]) + "'");
        }
    }
    if (p.kind == ParamKind::Boolean &&
        (p.values.size() != 2 || p.values[0] != ParamValue{false} ||
         p.values[1] != ParamValue{true}))
        fail(p.name, "boolean values must be [false, true]");
    if (p.default_index >= p.values.size())
        fail(p.name, "default not in values");

    if (p.kind == ParamKind::Boolean) {
        if (p.render.target == RenderTarget::EnvironmentVariable) {
            validate_env_template(p.name, p.render.on_template);
            validate_env_template(p.name, p.render.off_template);
        }
    } else {
        if (count_occurrences(p.render.value_template, kPlaceholder) != 1)
            fail(p.name, "template must contain {value} exactly once");
        if (p.render.target == RenderTarget::EnvironmentVariable)
            validate_env_template(p.name, p.render.value_template);
    }
}

std::string substitute(const std::string& tmpl, const std::string& value) {
    std::string out = tmpl;
    auto pos = out.find(kPlaceholder);
    out.replace(pos, kPlaceholder.size(), value);
    return out;
}

}  // namespace

std::string_view to_string(ParamKind kind) {
    switch (kind) {
    case ParamKind::Boolean: return "boolean";
    case ParamKind::Discrete: return "discrete";
    case ParamKind::Byte: return "byte";
    case ParamKind::Categorical: return "categorical";
    }
    return "?";
}

std::string_view to_string(RenderTarget target) {
    switch (target) {
    case RenderTarget::RuntimeFlag: return "runtime-flag";
    case RenderTarget::ContainerFlag: return "container-flag";
    case RenderTarget::EnvironmentVariable: return "environment-variable";
    }
    return "?";
}

std::optional<std::size_t> ParameterSpec::position_of(const ParamValue& value) const {
    auto it = std::find(values.begin(), values.end(), value);
    if (it == values.end())
        return std::nullopt;
    return static_cast<std::size_t>(it - values.begin());
}

std::string value_text(ParamKind kind, const ParamValue& value) {
    if (const auto* b = std::get_if<bool>(&value))
        return *b ? "true" : "false";
    if (const auto* i = std::get_if<std::int64_t>(&value)) {
        if (kind == ParamKind::Byte && *i > 0)
            return format_byte_size(static_cast<std::uint64_t>(*i));
        return std::to_string(*i);
    }
    return std::get<std::string>(value);
}

json value_to_json(const ParamValue& value) {
    return std::visit([](const auto& v) { return json(v); }, value);
}

ParamValue value_from_json(ParamKind kind, const json& j) {
    switch (kind) {
    case ParamKind::Boolean:
        if (!j.is_boolean())
            throw SpaceError("expected boolean value, got " + j.dump());
        return j.get<bool>();
    case ParamKind::Discrete:
        if (!j.is_number_integer())
            throw SpaceError("expected integer value, got " + j.dump());
        return j.get<std::int64_t>();
    case ParamKind::Byte:
        if (j.is_string())
            return static_cast<std::int64_t>(parse_byte_size(j.get<std::string>()));
        if (j.is_number_integer()) {
            if (j.is_number_unsigned() ? j.get<std::uint64_t>() == 0 : j.get<std::int64_t>() <= 0)
                throw SpaceError("byte value must be positive, got " + j.dump());
            if (j.is_number_unsigned() &&
                j.get<std::uint64_t>() >
                    static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
                throw SpaceError("byte value out of range: " + j.dump());
            return j.get<std::int64_t>();
        }
        throw SpaceError("expected byte size, got " + j.dump());
    case ParamKind::Categorical:
        if (!j.is_string())
            throw SpaceError("expected string value, got " + j.dump());
        return j.get<std::string>();
    }
    throw SpaceError("unknown kind");
}

ParamValue value_from_key(ParamKind kind, std::string_view key) {
    switch (kind) {
    case ParamKind::Boolean:
        if (key == "true") return true;
        if (key == "false") return false;
        throw SpaceError("expected 'true' or 'false', got '" + std::string(key) + "'");
    case ParamKind::Discrete: {
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), v);
        if (ec != std::errc{} || ptr != key.data() + key.size())
            throw SpaceError("expected integer, got '" + std::string(key) + "'");
        return v;
    }
    case ParamKind::Byte:
        return static_cast<std::int64_t>(parse_byte_size(key));
    case ParamKind::Categorical:
        return std::string(key);
    }
    throw SpaceError("unknown kind");
}

const ParamValue* Configuration::find(std::string_view name) const {
    for (const auto& [k, v] : entries_) {
        if (k == name)
            return &v;
    }
    return nullptr;
}

const ParamValue& Configuration::at(std::string_view name) const {
    if (const auto* v = find(name))
        return *v;
    throw SpaceError("configuration has no parameter '" + std::string(name) + "'");
}

SearchSpace::SearchSpace(std::string name, std::vector<ParameterSpec> parameters)
    : name_(std::move(name)), parameters_(std::move(parameters)) {
    std::set<std::string, std::less<>> seen;
    for (const auto& p : parameters_) {
        validate_parameter(p);
        if (!seen.insert(p.name).second)
            fail(p.name, "duplicate parameter name");
    }
    std::uint64_t product = 1;
    for (const auto& p : parameters_) {
        if (!p.enabled)
            continue;
        const std::uint64_t radix = p.values.size();
        if (product > std::numeric_limits<std::uint64_t>::max() / radix)
            throw SpaceError("search space '" + name_ + "' cardinality overflows 64 bits");
        product *= radix;
    }
    cardinality_ = product;
}

const ParameterSpec* SearchSpace::find(std::string_view name) const {
    auto pos = position_of(name);
    return pos ? &parameters_[*pos] : nullptr;
}

std::optional<std::size_t> SearchSpace::position_of(std::string_view name) const {
    for (std::size_t i = 0; i < parameters_.size(); ++i) {
        if (parameters_[i].name == name)
            return i;
    }
    return std::nullopt;
}

Configuration SearchSpace::config_at(std::uint64_t index) const {
    if (index >= cardinality_)
        throw std::out_of_range("configuration index " + std::to_string(index) +
                                " out of range (cardinality " + std::to_string(cardinality_) +
                                ")");
    std::vector<Configuration::Entry> entries(parameters_.size());
    // Decode from the least significant digit (last enabled parameter).
    for (std::size_t i = parameters_.size(); i-- > 0;) {
        const auto& p = parameters_[i];
        std::size_t pos = p.default_index;
        if (p.enabled) {
            pos = static_cast<std::size_t>(index % p.values.size());
            index /= p.values.size();
        }
        entries[i] = {p.name, p.values[pos]};
    }
    return Configuration(std::move(entries));
}

std::vector<std::size_t> SearchSpace::value_positions(const Configuration& config) const {
    if (config.size() != parameters_.size()) {
        for (const auto& [k, v] : config.entries()) {
            if (!find(k))
                throw SpaceError("unknown parameter '" + k + "'");
        }
    }
    std::vector<std::size_t> positions;
    positions.reserve(parameters_.size());
    for (const auto& p : parameters_) {
        const auto* v = config.find(p.name);
        if (!v)
            fail(p.name, "missing from configuration");
        auto pos = p.position_of(*v);
        if (!pos)
            fail(p.name, "value not admissible");
        if (!p.enabled && *pos != p.default_index)
            fail(p.name, "disabled parameter must carry its default");
        positions.push_back(*pos);
    }
    if (config.size() != parameters_.size())
        throw SpaceError("configuration has duplicate entries");
    return positions;
}

std::uint64_t SearchSpace::index_of(const Configuration& config) const {
    const auto positions = value_positions(config);
    std::uint64_t index = 0;
    for (std::size_t i = 0; i < parameters_.size(); ++i) {
        if (parameters_[i].enabled)
            index = index * parameters_[i].values.size() + positions[i];
    }
    return index;
}

Configuration SearchSpace::defaults() const {
    std::vector<Configuration::Entry> entries;
    entries.reserve(parameters_.size());
    for (const auto& p : parameters_)
        entries.emplace_back(p.name, p.default_value());
    return Configuration(std::move(entries));
}

Configuration SearchSpace::normalize(const Configuration& config) const {
    const auto positions = value_positions(config);
    std::vector<Configuration::Entry> entries;
    entries.reserve(parameters_.size());
    for (std::size_t i = 0; i < parameters_.size(); ++i)
        entries.emplace_back(parameters_[i].name, parameters_[i].values[positions[i]]);
    return Configuration(std::move(entries));
}

Configuration SearchSpace::configuration_from_json(const json& j) const {
    if (!j.is_object())
        throw SpaceError("configuration must be a JSON object");
    std::vector<Configuration::Entry> entries;
    for (const auto& [key, value] : j.items()) {
        const auto* p = find(key);
        if (!p)
            throw SpaceError("unknown parameter '" + key + "'");
        try {
            entries.emplace_back(key, value_from_json(p->kind, value));
        } catch (const SpaceError& e) {
            fail(key, e.what());
        }
    }
    return normalize(Configuration(std::move(entries)));
}

RenderedConfig SearchSpace::render(const Configuration& config) const {
    const auto positions = value_positions(config);
    RenderedConfig out;
    for (std::size_t i = 0; i < parameters_.size(); ++i) {
        const auto& p = parameters_[i];
        const auto& value = p.values[positions[i]];
        std::string piece;
        if (p.kind == ParamKind::Boolean)
            piece = std::get<bool>(value) ? p.render.on_template : p.render.off_template;
        else
            piece = substitute(p.render.value_template, value_text(p.kind, value));
        if (piece.empty())
            continue;
        switch (p.render.target) {
        case RenderTarget::RuntimeFlag: out.runtime_flags.push_back(std::move(piece)); break;
        case RenderTarget::ContainerFlag: out.container_flags.push_back(std::move(piece)); break;
        case RenderTarget::EnvironmentVariable: {
            auto eq = piece.find('=');
            out.environment[piece.substr(0, eq)] = piece.substr(eq + 1);
            break;
        }
        }
    }
    return out;
}

SearchSpace SearchSpace::with_enabled(std::span<const std::string> names) const {
    for (const auto& n : names) {
        if (!find(n))
            throw SpaceError("unknown parameter '" + n + "'");
    }
    auto params = parameters_;
    for (auto& p : params)
        p.enabled = std::find(names.begin(), names.end(), p.name) != names.end();
    return SearchSpace(name_, std::move(params));
}

json SearchSpace::to_json() const {
    json params = json::array();
    for (const auto& p : parameters_) {
        json values = json::array();
        for (const auto& v : p.values)
            values.push_back(value_to_json(v));
        json render{{"target", to_string(p.render.target)}};
        if (p.kind == ParamKind::Boolean) {
            render["on_template"] = p.render.on_template;
            render["off_template"] = p.render.off_template;
        } else {
            render["template"] = p.render.value_template;
        }
        params.push_back({{"name", p.name},
                          {"kind", to_string(p.kind)},
                          {"values", std::move(values)},
                          {"default", value_to_json(p.default_value())},
                          {"enabled", p.enabled},
                          {"render", std::move(render)}});
    }
    return {{"name", name_}, {"parameters", std::move(params)}};
}

json configuration_to_json(const Configuration& config) {
    json out = json::object();
    for (const auto& [k, v] : config.entries())
        out[k] = value_to_json(v);
    return out;
}

namespace {

ParameterSpec parse_parameter(const json& j, std::size_t ordinal) {
    if (!j.is_object())
        throw SpaceError("parameter #" + std::to_string(ordinal) + " is not an object");
    ParameterSpec p;
    if (!j.contains("name") || !j["name"].is_string())
        throw SpaceError("parameter #" + std::to_string(ordinal) + " has no string 'name'");
    p.name = j["name"].get<std::string>();
    try {
        if (!j.contains("kind") || !j["kind"].is_string())
            fail(p.name, "missing 'kind'");
        p.kind = parse_kind(j["kind"].get<std::string>(), p.name);

        if (!j.contains("values") || !j["values"].is_array())
            fail(p.name, "missing 'values' array");
        for (const auto& v : j["values"])
            p.values.push_back(value_from_json(p.kind, v));

        if (!j.contains("default"))
            fail(p.name, "missing 'default'");
        auto def = value_from_json(p.kind, j["default"]);
        auto pos = p.position_of(def);
        if (!pos)
            fail(p.name, "default not in values");
        p.default_index = *pos;

        p.enabled = j.value("enabled", true);

        const json render = j.value("render", json::object());
        if (!render.is_object())
            fail(p.name, "'render' must be an object");
        p.render.target = parse_target(render.value("target", "runtime-flag"), p.name);
        if (p.kind == ParamKind::Boolean) {
            p.render.on_template = render.value("on_template", "");
            p.render.off_template = render.value("off_template", "");
        } else {
            if (!render.contains("template"))
                fail(p.name, "render needs a 'template'");
            p.render.value_template = render["template"].get<std::string>();
        }
    } catch (const SpaceError& e) {
        const std::string msg = e.what();
        if (msg.rfind("parameter '", 0) == 0)
            throw;
        fail(p.name, msg);
    } catch (const json::exception& e) {
        fail(p.name, e.what());
    }
    return p;
}

}  // namespace

SearchSpace parse_space(const json& document) {
    if (!document.is_object())
        throw SpaceError("search space document must be a JSON object");
    std::string name = document.value("name", "");
    if (!document.contains("parameters") || !document["parameters"].is_array())
        throw SpaceError("search space document needs a 'parameters' array");
    std::vector<ParameterSpec> params;
    std::size_t ordinal = 0;
    for (const auto& pj : document["parameters"])
        params.push_back(parse_parameter(pj, ordinal++));
    return SearchSpace(std::move(name), std::move(params));
}

SearchSpace parse_space_text(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SpaceError(std::string("malformed search space document: ") + e.what());
    }
    return parse_space(doc);
}

SearchSpace load_space_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw SpaceError("cannot open search space file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_space_text(buf.str());
}

}  // namespace microtune
