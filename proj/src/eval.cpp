#include "emojipred/eval.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace emojipred::eval {

long long ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), 0LL);
}

long long ConfusionMatrix::row_sum(int r) const {
    long long s = 0;
    for (int c = 0; c < k; ++c) s += at(r, c);
    return s;
}

long long ConfusionMatrix::col_sum(int c) const {
    long long s = 0;
    for (int r = 0; r < k; ++r) s += at(r, c);
    return s;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& gold,
                                 const std::vector<int>& pred, int k) {
    if (gold.size() != pred.size())
        throw std::invalid_argument("confusion_matrix: gold/pred length mismatch");
    ConfusionMatrix cm(k);
    for (size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] < 0 || gold[i] >= k || pred[i] < 0 || pred[i] >= k)
            throw std::out_of_range("confusion_matrix: label index out of range");
        ++cm.at(gold[i], pred[i]);
    }
    return cm;
}

std::vector<double> normalize_rows(const ConfusionMatrix& cm) {
    std::vector<double> out(size_t(cm.k) * cm.k, 0.0);
    for (int r = 0; r < cm.k; ++r) {
        long long rs = cm.row_sum(r);
        if (rs == 0) continue;
        for (int c = 0; c < cm.k; ++c)
            out[size_t(r) * cm.k + c] = double(cm.at(r, c)) / double(rs);
    }
    return out;
}

std::vector<Prf> per_class_prf(const ConfusionMatrix& cm) {
    std::vector<Prf> out(cm.k);
    for (int i = 0; i < cm.k; ++i) {
        long long tp = cm.at(i, i);
        long long cs = cm.col_sum(i);
        long long rs = cm.row_sum(i);
        Prf& m = out[i];
        m.precision = cs > 0 ? double(tp) / double(cs) : 0.0;
        m.recall = rs > 0 ? double(tp) / double(rs) : 0.0;
        m.f1 = (m.precision + m.recall) > 0.0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
    }
    return out;
}

Prf macro_prf(const ConfusionMatrix& cm) {
    auto per = per_class_prf(cm);
    Prf m;
    for (const auto& c : per) {
        m.precision += c.precision;
        m.recall += c.recall;
        m.f1 += c.f1;
    }
    if (cm.k > 0) {
        m.precision /= cm.k;
        m.recall /= cm.k;
        m.f1 /= cm.k;
    }
    return m;
}

MetricsReport metrics_report(const ConfusionMatrix& cm,
                             const std::vector<std::string>& labels) {
    MetricsReport r;
    r.k = cm.k;
    r.n = cm.total();
    r.labels = labels;
    r.per_class = per_class_prf(cm);
    r.macro = macro_prf(cm);
    return r;
}

int majority_baseline(const std::vector<int>& train_labels, int k) {
    if (train_labels.empty())
        throw std::invalid_argument("majority_baseline: empty training set");
    std::vector<long long> counts(k, 0);
    for (int l : train_labels) ++counts.at(l);
    int best = 0;
    for (int i = 1; i < k; ++i)
        if (counts[i] > counts[best]) best = i;
    return best;
}

WeightedRandomBaseline::WeightedRandomBaseline(
    const std::vector<int>& train_labels, int k, uint64_t seed)
    : probs_(k, 0.0), rng_(seed) {
    if (train_labels.empty())
        throw std::invalid_argument("weighted_random_baseline: empty training set");
    for (int l : train_labels) probs_.at(l) += 1.0;
    for (double& p : probs_) p /= double(train_labels.size());
    dist_ = std::discrete_distribution<int>(probs_.begin(), probs_.end());
}

int WeightedRandomBaseline::sample() { return dist_(rng_); }

double relative_improvement(double new_percent, double base_percent) {
    if (base_percent <= 0.0)
        throw std::invalid_argument("relative_improvement: base must be > 0");
    double raw = 100.0 * (new_percent - base_percent) / base_percent;
    return std::round(raw * 10.0) / 10.0;
}

std::string metrics_to_json(const MetricsReport& report) {
    nlohmann::json j;
    j["k"] = report.k;
    j["n"] = report.n;
    if (!report.labels.empty()) j["labels"] = report.labels;
    nlohmann::json per = nlohmann::json::array();
    for (const auto& m : report.per_class) {
        per.push_back({{"precision", m.precision},
                       {"recall", m.recall},
                       {"f1", m.f1}});
    }
    j["per_class"] = per;
    j["macro"] = {{"precision", report.macro.precision},
                  {"recall", report.macro.recall},
                  {"f1", report.macro.f1}};
    return j.dump(2);
}

std::string confusion_to_csv(const ConfusionMatrix& cm,
                             const std::vector<std::string>& labels) {
    std::string out = "gold\\pred";
    auto name = [&](int i) {
        return i < int(labels.size()) ? labels[i] : "class" + std::to_string(i);
    };
    for (int c = 0; c < cm.k; ++c) out += "," + name(c);
    out += "\n";
    for (int r = 0; r < cm.k; ++r) {
        out += name(r);
        for (int c = 0; c < cm.k; ++c) out += "," + std::to_string(cm.at(r, c));
        out += "\n";
    }
    return out;
}

void confusion_to_pgm(const ConfusionMatrix& cm, const std::string& path) {
    auto norm = normalize_rows(cm);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("confusion_to_pgm: cannot open " + path);
    f << "P5\n" << cm.k << " " << cm.k << "\n255\n";
    for (double v : norm) {
        unsigned char px = static_cast<unsigned char>(std::lround(v * 255.0));
        f.write(reinterpret_cast<const char*>(&px), 1);
    }
    if (!f) throw std::runtime_error("confusion_to_pgm: write failed for " + path);
}

}  // namespace emojipred::eval
