#include "hjblab/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace hjb {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// strips a trailing comment, respecting double-quoted strings
std::string strip_comment(const std::string& s) {
    bool in_str = false;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') in_str = !in_str;
        else if (s[i] == '#' && !in_str) return s.substr(0, i);
    }
    return s;
}

std::vector<std::string> split_path(const std::string& s, int line) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == '.') {
            if (cur.empty())
                throw ConfigError("line " + std::to_string(line) + ": empty path segment");
            parts.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (trim(cur).empty())
        throw ConfigError("line " + std::to_string(line) + ": empty path segment");
    parts.push_back(trim(cur));
    return parts;
}

ConfigValue parse_value(const std::string& raw, int line);

ConfigValue parse_array(const std::string& raw, int line) {
    ConfigValue v;
    v.type = ConfigValue::Type::array;
    v.line = line;
    std::string body = trim(raw.substr(1, raw.size() - 2));
    if (body.empty()) return v;
    int depth = 0;
    bool in_str = false;
    std::string cur;
    for (char c : body) {
        if (c == '"') in_str = !in_str;
        if (!in_str) {
            if (c == '[') ++depth;
            if (c == ']') --depth;
            if (c == ',' && depth == 0) {
                v.array.push_back(parse_value(trim(cur), line));
                cur.clear();
                continue;
            }
        }
        cur += c;
    }
    if (!trim(cur).empty()) v.array.push_back(parse_value(trim(cur), line));
    return v;
}

ConfigValue parse_value(const std::string& raw, int line) {
    ConfigValue v;
    v.line = line;
    if (raw.empty()) throw ConfigError("line " + std::to_string(line) + ": missing value");
    if (raw.front() == '"') {
        if (raw.size() < 2 || raw.back() != '"')
            throw ConfigError("line " + std::to_string(line) + ": unterminated string");
        v.type = ConfigValue::Type::string;
        v.str = raw.substr(1, raw.size() - 2);
        return v;
    }
    if (raw.front() == '[') {
        if (raw.back() != ']')
            throw ConfigError("line " + std::to_string(line) + ": unterminated array");
        return parse_array(raw, line);
    }
    if (raw == "true" || raw == "false") {
        v.type = ConfigValue::Type::boolean;
        v.boolean = raw == "true";
        return v;
    }
    try {
        size_t used = 0;
        v.num = std::stod(raw, &used);
        if (used != raw.size()) throw std::invalid_argument("trailing");
        v.type = ConfigValue::Type::number;
        return v;
    } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line) + ": cannot parse value '" + raw + "'");
    }
}

ConfigTable* descend(ConfigTable& root, const std::vector<std::string>& path, int line,
                     bool array_leaf) {
    ConfigTable* cur = &root;
    for (size_t i = 0; i < path.size(); ++i) {
        const std::string& key = path[i];
        const bool leaf = i + 1 == path.size();
        if (leaf && array_leaf) {
            auto& vec = cur->table_arrays[key];
            vec.push_back(std::make_shared<ConfigTable>());
            vec.back()->line = line;
            return vec.back().get();
        }
        auto& slot = cur->tables[key];
        if (!slot) {
            slot = std::make_shared<ConfigTable>();
            slot->line = line;
        }
        cur = slot.get();
    }
    return cur;
}

} // namespace

ConfigTable parse_config(const std::string& text) {
    ConfigTable root;
    ConfigTable* current = &root;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            const bool is_array = line.size() > 1 && line[1] == '[';
            const std::string closer = is_array ? "]]" : "]";
            if (line.substr(line.size() - closer.size()) != closer)
                throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
            const std::string inner =
                trim(line.substr(is_array ? 2 : 1, line.size() - 2 * (is_array ? 2 : 1)));
            current = descend(root, split_path(inner, line_no), line_no, is_array);
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        current->values[key] = parse_value(trim(line.substr(eq + 1)), line_no);
    }
    return root;
}

ConfigTable parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void apply_override(ConfigTable& root, const std::string& assignment) {
    const size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("--set expects section.key=value, got '" + assignment + "'");
    const std::vector<std::string> path = split_path(trim(assignment.substr(0, eq)), 0);
    if (path.empty()) throw ConfigError("--set has an empty path");
    ConfigTable* cur = &root;
    for (size_t i = 0; i + 1 < path.size(); ++i) {
        auto& slot = cur->tables[path[i]];
        if (!slot) slot = std::make_shared<ConfigTable>();
        cur = slot.get();
    }
    cur->values[path.back()] = parse_value(trim(assignment.substr(eq + 1)), 0);
}

double ConfigTable::number(const std::string& key, const std::string& where) const {
    auto it = values.find(key);
    if (it == values.end())
        throw ConfigError("[" + where + "] is missing required key '" + key + "'");
    if (it->second.type != ConfigValue::Type::number)
        throw ConfigError("[" + where + "." + key + "] (line " +
                          std::to_string(it->second.line) + ") must be a number");
    return it->second.num;
}

double ConfigTable::number_or(const std::string& key, double fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    if (it->second.type != ConfigValue::Type::number)
        throw ConfigError("key '" + key + "' (line " + std::to_string(it->second.line) +
                          ") must be a number");
    return it->second.num;
}

std::string ConfigTable::string(const std::string& key, const std::string& where) const {
    auto it = values.find(key);
    if (it == values.end())
        throw ConfigError("[" + where + "] is missing required key '" + key + "'");
    if (it->second.type != ConfigValue::Type::string)
        throw ConfigError("[" + where + "." + key + "] (line " +
                          std::to_string(it->second.line) + ") must be a string");
    return it->second.str;
}

std::string ConfigTable::string_or(const std::string& key, const std::string& fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    return it->second.type == ConfigValue::Type::string ? it->second.str : fallback;
}

bool ConfigTable::boolean_or(const std::string& key, bool fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    return it->second.type == ConfigValue::Type::boolean ? it->second.boolean : fallback;
}

std::vector<double> ConfigTable::numbers(const std::string& key, const std::string& where) const {
    auto it = values.find(key);
    if (it == values.end())
        throw ConfigError("[" + where + "] is missing required key '" + key + "'");
    if (it->second.type != ConfigValue::Type::array)
        throw ConfigError("[" + where + "." + key + "] must be an array");
    std::vector<double> out;
    for (const auto& v : it->second.array) {
        if (v.type != ConfigValue::Type::number)
            throw ConfigError("[" + where + "." + key + "] must hold numbers only");
        out.push_back(v.num);
    }
    return out;
}

const ConfigTable& ConfigTable::table(const std::string& key, const std::string& where) const {
    auto it = tables.find(key);
    if (it == tables.end())
        throw ConfigError("config is missing required section [" +
                          (where.empty() ? key : where + "." + key) + "]");
    return *it->second;
}

} // namespace hjb
