#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace emojipred::cli {

// Plain key=value run configuration. Every key has a documented default;
// unknown keys are rejected. Flag overrides win over file values.
class RunConfig {
public:
    RunConfig();

    // Parses `key=value` lines ('#' comments, blank lines allowed).
    void load_file(const std::string& path);
    // Applies `key=value` override strings (from CLI flags).
    void apply_overrides(const std::vector<std::string>& overrides);

    const std::string& get(const std::string& key) const;
    int get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    uint64_t get_seed(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    // Effective config (defaults merged with overrides), one key per line.
    std::string render() const;
    void write(const std::string& path) const;

    static const std::map<std::string, std::string>& defaults();

private:
    void set(const std::string& key, const std::string& value);
    std::map<std::string, std::string> values_;
};

}  // namespace emojipred::cli
