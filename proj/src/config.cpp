#include "emojipred/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace emojipred::cli {

const std::map<std::string, std::string>& RunConfig::defaults() {
    static const std::map<std::string, std::string> d = {
        {"k", "10"},
        {"split_seed", "1"},
        {"train_seed", "1"},
        {"baseline_seed", "1"},
        {"text_dim", "50"},
        {"text_lr0", "0.1"},
        {"text_epochs", "20"},
        {"text_min_count", "2"},
        {"text_patience", "3"},
        {"text_normalize_embedding", "false"},
        {"featurizer_grid", "8"},
        {"logreg_max_iters", "500"},
        {"logreg_grad_tol", "1e-6"},
        {"logreg_init_scale", "0"},
        {"standardize_features", "true"},
        {"lambda_grid", "0,1e-4,1e-3,1e-2,1e-1,1"},
    };
    return d;
}

RunConfig::RunConfig() : values_(defaults()) {}

void RunConfig::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end())
        throw std::invalid_argument("config: unknown key '" + key + "'");
    it->second = value;
}

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    std::string line;
    size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: " + path + " line " +
                                     std::to_string(line_no) + ": expected key=value");
        set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
}

void RunConfig::apply_overrides(const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
        auto eq = o.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: override must be key=value, got '" +
                                        o + "'");
        set(trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
    }
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end())
        throw std::invalid_argument("config: unknown key '" + key + "'");
    return it->second;
}

int RunConfig::get_int(const std::string& key) const {
    return std::stoi(get(key));
}

double RunConfig::get_double(const std::string& key) const {
    return std::stod(get(key));
}

uint64_t RunConfig::get_seed(const std::string& key) const {
    return std::stoull(get(key));
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config: key '" + key + "' is not a boolean: " + v);
}

std::string RunConfig::render() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << "=" << v << "\n";
    return out.str();
}

void RunConfig::write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("config: cannot write " + path);
    f << render();
}

}  // namespace emojipred::cli
