#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace btsup {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Flat key = value configuration ('#' comments, later keys win). Dotted keys
// namespace the modules: crawler.max_neighbors, matcher.k_sigma, world.seed.
class Config {
public:
    static Config parse_text(std::string_view text); // throws ConfigError on bad lines
    static Config parse_file(const std::string& path);

    void set(std::string_view key, std::string_view value);
    bool has(std::string_view key) const;
    std::optional<std::string> get(std::string_view key) const;

    std::string get_or(std::string_view key, std::string_view fallback) const;
    std::int64_t get_int(std::string_view key, std::int64_t fallback) const;  // throws on junk
    double get_double(std::string_view key, double fallback) const;
    bool get_bool(std::string_view key, bool fallback) const;
    // comma-separated values
    std::vector<std::string> get_list(std::string_view key) const;

    const std::map<std::string, std::string, std::less<>>& entries() const { return kv_; }

private:
    std::map<std::string, std::string, std::less<>> kv_;
};

} // namespace btsup
