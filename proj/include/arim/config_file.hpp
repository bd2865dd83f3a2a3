#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace arim {

/// Flat `key = value` configuration document.
///
/// Lines starting with `#` or `;` are comments; blank lines are ignored.
/// Keys are unique; a repeated key is a configuration error. Values are kept
/// as text and converted on access, so the same document can be shared by
/// several consumers that each read the keys they know.
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>");
    static KeyValueConfig load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::optional<std::string> get_string(const std::string& key) const;
    std::optional<double> get_double(const std::string& key) const;
    std::optional<long long> get_int(const std::string& key) const;
    std::optional<bool> get_bool(const std::string& key) const;
    std::optional<std::vector<long long>> get_int_list(const std::string& key) const;
    std::optional<std::vector<double>> get_double_list(const std::string& key) const;

    double get_double_or(const std::string& key, double fallback) const {
        return get_double(key).value_or(fallback);
    }
    long long get_int_or(const std::string& key, long long fallback) const {
        return get_int(key).value_or(fallback);
    }

    const std::map<std::string, std::string>& entries() const { return values_; }

    // Serializes in key order; parse(to_string()) reproduces the document.
    std::string to_string() const;
    void save(const std::filesystem::path& path) const;

    // Keys present here but absent from `known`.
    std::vector<std::string> unknown_keys(const std::vector<std::string>& known) const;

private:
    std::map<std::string, std::string> values_;
    std::string origin_;
};

// Shortest round-trippable decimal form of a double.
std::string format_double(double value);

} // namespace arim
