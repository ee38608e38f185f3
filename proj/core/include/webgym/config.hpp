#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace webgym {

// One structured config file drives every pipeline command. INI-style
// sections ([corpus], [index], [gateway], [episode], [trainer], [curriculum],
// [synthesis], [multihop]) with `key = value` entries; '#' and ';' start
// comments. Flags override config values; env vars are reserved for
// endpoints.
class Config {
public:
    Config() = default;

    static Config parse(std::string_view text);
    static Config load(const std::string& path);

    bool has(const std::string& section, const std::string& key) const;

    std::string get_string(const std::string& section, const std::string& key,
                           std::string fallback) const;
    long long get_int(const std::string& section, const std::string& key,
                      long long fallback) const;
    double get_double(const std::string& section, const std::string& key,
                      double fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

    void set(const std::string& section, const std::string& key, std::string value);

    const std::map<std::string, std::map<std::string, std::string>>& sections() const {
        return sections_;
    }

private:
    std::optional<std::string> raw(const std::string& section, const std::string& key) const;

    std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace webgym
