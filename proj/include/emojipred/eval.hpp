#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace emojipred::eval {

// k x k integer counts; rows are gold labels, columns predictions.
struct ConfusionMatrix {
    int k = 0;
    std::vector<long long> counts;  // row-major

    explicit ConfusionMatrix(int k_ = 0) : k(k_), counts(size_t(k_) * k_, 0) {}
    long long& at(int gold, int pred) { return counts[size_t(gold) * k + pred]; }
    long long at(int gold, int pred) const { return counts[size_t(gold) * k + pred]; }
    long long total() const;
    long long row_sum(int r) const;
    long long col_sum(int c) const;
};

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct MetricsReport {
    int k = 0;
    long long n = 0;
    std::vector<std::string> labels;  // may be empty when unnamed
    std::vector<Prf> per_class;
    Prf macro;
};

// gold/pred as class indices in [0,k). Throws on length mismatch or
// out-of-range index.
ConfusionMatrix confusion_matrix(const std::vector<int>& gold,
                                 const std::vector<int>& pred, int k);

// Row-normalized matrix; all-zero rows stay zero.
std::vector<double> normalize_rows(const ConfusionMatrix& cm);

// P_i = cm[i][i]/colsum_i, R_i = cm[i][i]/rowsum_i, 0/0 defined as 0.
std::vector<Prf> per_class_prf(const ConfusionMatrix& cm);
// Unweighted mean of the per-class values.
Prf macro_prf(const ConfusionMatrix& cm);

MetricsReport metrics_report(const ConfusionMatrix& cm,
                             const std::vector<std::string>& labels = {});

// Constant predictor: the most frequent training class, ties broken by
// lower class index.
int majority_baseline(const std::vector<int>& train_labels, int k);

// Samples predictions i.i.d. from the training label distribution.
class WeightedRandomBaseline {
public:
    WeightedRandomBaseline(const std::vector<int>& train_labels, int k,
                           uint64_t seed);
    int sample();
    const std::vector<double>& class_probs() const { return probs_; }

private:
    std::vector<double> probs_;
    std::discrete_distribution<int> dist_;
    std::mt19937_64 rng_;
};

// 100*(new-base)/base rounded to one decimal. Throws if base <= 0.
double relative_improvement(double new_percent, double base_percent);

// Serialization.
std::string metrics_to_json(const MetricsReport& report);
std::string confusion_to_csv(const ConfusionMatrix& cm,
                             const std::vector<std::string>& labels = {});
// Row-normalized heatmap as PGM P5, darker = lower.
void confusion_to_pgm(const ConfusionMatrix& cm, const std::string& path);

}  // namespace emojipred::eval
