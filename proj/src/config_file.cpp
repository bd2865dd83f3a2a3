#include "arim/config_file.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "arim/error.hpp"

namespace arim {
namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> items;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

double to_double(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t == "inf" || t == "+inf") return HUGE_VAL;
    if (t == "-inf") return -HUGE_VAL;
    double value = 0.0;
    const auto* end = t.data() + t.size();
    const auto [ptr, ec] = std::from_chars(t.data(), end, value);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError("key '" + key + "': expected a number, got '" + text + "'");
    }
    return value;
}

long long to_int(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    long long value = 0;
    const auto* end = t.data() + t.size();
    const auto [ptr, ec] = std::from_chars(t.data(), end, value);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError("key '" + key + "': expected an integer, got '" + text + "'");
    }
    return value;
}

} // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin) {
    KeyValueConfig cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
        }
        if (!cfg.values_.emplace(key, value).second) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw PersistenceError("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path.string());
}

std::optional<std::string> KeyValueConfig::get_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::optional<double> KeyValueConfig::get_double(const std::string& key) const {
    const auto s = get_string(key);
    if (!s) return std::nullopt;
    return to_double(key, *s);
}

std::optional<long long> KeyValueConfig::get_int(const std::string& key) const {
    const auto s = get_string(key);
    if (!s) return std::nullopt;
    return to_int(key, *s);
}

std::optional<bool> KeyValueConfig::get_bool(const std::string& key) const {
    const auto s = get_string(key);
    if (!s) return std::nullopt;
    std::string v = *s;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "off" || v == "no") return false;
    throw ConfigError("key '" + key + "': expected a boolean, got '" + *s + "'");
}

std::optional<std::vector<long long>> KeyValueConfig::get_int_list(const std::string& key) const {
    const auto s = get_string(key);
    if (!s) return std::nullopt;
    std::vector<long long> out;
    for (const auto& item : split_list(*s)) out.push_back(to_int(key, item));
    return out;
}

std::optional<std::vector<double>> KeyValueConfig::get_double_list(const std::string& key) const {
    const auto s = get_string(key);
    if (!s) return std::nullopt;
    std::vector<double> out;
    for (const auto& item : split_list(*s)) out.push_back(to_double(key, item));
    return out;
}

std::string KeyValueConfig::to_string() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

void KeyValueConfig::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw PersistenceError("cannot write config file " + path.string());
    out << to_string();
    if (!out) throw PersistenceError("write failed for " + path.string());
}

std::vector<std::string> KeyValueConfig::unknown_keys(const std::vector<std::string>& known) const {
    std::vector<std::string> unknown;
    for (const auto& [k, v] : values_) {
        if (std::find(known.begin(), known.end(), k) == known.end()) unknown.push_back(k);
    }
    return unknown;
}

std::string format_double(double value) {
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

} // namespace arim
