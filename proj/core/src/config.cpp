#include "webgym/config.hpp"

#include "webgym/text.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace webgym {

Config Config::parse(std::string_view text) {
    Config cfg;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line.erase(comment);
        std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[' && t.back() == ']') {
            section = trim(t.substr(1, t.size() - 2));
            cfg.sections_[section];
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config: malformed line: " + t);
        }
        cfg.sections_[section][trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return cfg;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

bool Config::has(const std::string& section, const std::string& key) const {
    return raw(section, key).has_value();
}

std::optional<std::string> Config::raw(const std::string& section,
                                       const std::string& key) const {
    auto s = sections_.find(section);
    if (s == sections_.end()) return std::nullopt;
    auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    return k->second;
}

std::string Config::get_string(const std::string& section, const std::string& key,
                               std::string fallback) const {
    auto v = raw(section, key);
    return v ? *v : std::move(fallback);
}

long long Config::get_int(const std::string& section, const std::string& key,
                          long long fallback) const {
    auto v = raw(section, key);
    if (!v) return fallback;
    return std::stoll(*v);
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
    auto v = raw(section, key);
    if (!v) return fallback;
    return std::stod(*v);
}

bool Config::get_bool(const std::string& section, const std::string& key,
                      bool fallback) const {
    auto v = raw(section, key);
    if (!v) return fallback;
    std::string s = to_lower(*v);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw std::runtime_error("config: not a boolean: " + section + "." + key + "=" + *v);
}

void Config::set(const std::string& section, const std::string& key, std::string value) {
    sections_[section][key] = std::move(value);
}

}  // namespace webgym
