#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sedw {

// Flat key-value config with dotted section prefixes:
//   train.lr_max = 0.0014
//   cnmf.components = 4
// '#' starts a comment.
class Config {
public:
    Config() = default;
    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text);

    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long get_long(const std::string& key, long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<long> get_long_list(const std::string& key, const std::vector<long>& fallback) const;

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }

    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

} // namespace sedw
