#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace hjb {

/// Raised on malformed or incomplete configuration; carries the offending
/// section/key and, when known, the source line.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// One parsed TOML-compatible value: string, number, boolean, or a
/// homogeneous one-line array.
struct ConfigValue {
    enum class Type { string, number, boolean, array };
    Type type = Type::number;
    std::string str;
    double num = 0.0;
    bool boolean = false;
    std::vector<ConfigValue> array;
    int line = 0;
};

/// Section tree of the config file: scalar entries, named subsections, and
/// arrays of tables ([[section]] blocks).
struct ConfigTable {
    std::map<std::string, ConfigValue> values;
    std::map<std::string, std::shared_ptr<ConfigTable>> tables;
    std::map<std::string, std::vector<std::shared_ptr<ConfigTable>>> table_arrays;
    int line = 0;

    bool has(const std::string& key) const { return values.count(key) != 0; }
    bool has_table(const std::string& key) const { return tables.count(key) != 0; }

    /// Typed getters; `where` names the section for error messages.
    double number(const std::string& key, const std::string& where) const;
    double number_or(const std::string& key, double fallback) const;
    std::string string(const std::string& key, const std::string& where) const;
    std::string string_or(const std::string& key, const std::string& fallback) const;
    bool boolean_or(const std::string& key, bool fallback) const;
    std::vector<double> numbers(const std::string& key, const std::string& where) const;
    const ConfigTable& table(const std::string& key, const std::string& where) const;
};

/// Parses the TOML-compatible subset: [a.b] sections, [[a.b]] arrays of
/// tables, key = value with strings, numbers, booleans, and one-line arrays.
ConfigTable parse_config(const std::string& text);
ConfigTable parse_config_file(const std::string& path);

/// Applies one "--set section.key=value" override in place.
void apply_override(ConfigTable& root, const std::string& assignment);

} // namespace hjb
