#include "ctlab/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace ctlab::config {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path, 0);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

Config Config::parse_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string raw;
    std::string current;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
            current = trim(line.substr(1, line.size() - 2));
            if (current.empty()) throw ConfigError("empty section name", line_no);
            if (!cfg.sections_.count(current)) {
                cfg.sections_[current] = {};
                cfg.section_order_.push_back(current);
            }
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected key = value", line_no);
        if (current.empty()) throw ConfigError("key outside of any [section]", line_no);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("empty key", line_no);
        for (const auto& kv : cfg.sections_[current])
            if (kv.first == key)
                throw ConfigError("duplicate key '" + key + "' in [" + current + "]", line_no);
        cfg.sections_[current].emplace_back(key, value);
    }
    return cfg;
}

bool Config::has_section(const std::string& section) const {
    return sections_.count(section) > 0;
}

bool Config::has(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    if (it == sections_.end()) return false;
    for (const auto& kv : it->second)
        if (kv.first == key) return true;
    return false;
}

std::string Config::get(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    if (it != sections_.end())
        for (const auto& kv : it->second)
            if (kv.first == key) return kv.second;
    throw ConfigError("missing required key '" + key + "' in [" + section + "]", 0);
}

std::string Config::get_or(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

double Config::get_double(const std::string& section, const std::string& key) const {
    const std::string v = get(section, key);
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw ConfigError("key '" + key + "' in [" + section + "] is not a number: " + v, 0);
    return d;
}

double Config::get_double_or(const std::string& section, const std::string& key,
                             double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
}

long Config::get_int(const std::string& section, const std::string& key) const {
    const std::string v = get(section, key);
    char* end = nullptr;
    const long d = std::strtol(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw ConfigError("key '" + key + "' in [" + section + "] is not an integer: " + v, 0);
    return d;
}

long Config::get_int_or(const std::string& section, const std::string& key, long fallback) const {
    return has(section, key) ? get_int(section, key) : fallback;
}

std::vector<std::pair<std::string, std::string>> Config::section_items(
    const std::string& section) const {
    auto it = sections_.find(section);
    if (it == sections_.end()) return {};
    return it->second;
}

}  // namespace ctlab::config
