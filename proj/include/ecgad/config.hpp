#pragma once

#include <map>
#include <string>
#include <vector>

namespace ecgad {

// Plain-text key-value configuration: one `key = value` per line, `#` starts
// a comment. Used for run configs, synthesis specs, and manifest snapshots.
class Config {
public:
    Config() = default;

    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text);

    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    std::string get_str(const std::string& key, const std::string& fallback) const;
    std::string require_str(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    double require_double(const std::string& key) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    // "a:b" parses as a range, a single number as a degenerate one.
    std::pair<double, double> get_range(const std::string& key, double lo, double hi) const;

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    void set_double(const std::string& key, double value);
    void set_int(const std::string& key, long long value);

    // Keys sharing `prefix.`; returned with the prefix stripped.
    std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

    void merge(const Config& other);  // other wins

    // Deterministic render (sorted keys), suitable for manifests.
    std::string to_string() const;
    void save(const std::string& path) const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

// Round-trip-exact float formatting (%.17g trimmed); every float written to
// CSV/manifests goes through this so reruns are byte-comparable.
std::string format_double(double v);

}  // namespace ecgad
