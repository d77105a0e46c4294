#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctlab::config {

// Validation failure with the offending line recorded.
struct ConfigError : std::runtime_error {
    ConfigError(const std::string& msg, int line_number)
        : std::runtime_error(line_number > 0
                                 ? "line " + std::to_string(line_number) + ": " + msg
                                 : msg),
          line(line_number) {}
    int line = 0;
};

// Sectioned key=value text:  [section] headers, key = value lines,
// comments with '#'. Duplicate keys within a section are rejected.
class Config {
public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text);

    bool has_section(const std::string& section) const;
    bool has(const std::string& section, const std::string& key) const;

    std::string get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key) const;
    double get_double_or(const std::string& section, const std::string& key,
                         double fallback) const;
    long get_int(const std::string& section, const std::string& key) const;
    long get_int_or(const std::string& section, const std::string& key, long fallback) const;

    // all keys of a section in file order
    std::vector<std::pair<std::string, std::string>> section_items(
        const std::string& section) const;
    std::vector<std::string> section_names() const { return section_order_; }

private:
    // section -> ordered key/value pairs; order kept for deterministic echo
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections_;
    std::vector<std::string> section_order_;
};

}  // namespace ctlab::config
