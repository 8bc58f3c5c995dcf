#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "emojipred/corpus.hpp"
#include "emojipred/matrix.hpp"

namespace emojipred::text {

// Lowercase, whitespace split, strip surrounding punctuation; '#' and '@'
// prefixes survive so hashtags and mentions stay intact.
std::vector<std::string> tokenize(const std::string& text);

// Dense token -> row index map over the training text.
struct TextVocab {
    std::unordered_map<std::string, int> index;
    int min_count = 1;

    int size() const { return static_cast<int>(index.size()); }
    int lookup(const std::string& token) const;  // -1 when out of vocab

    static TextVocab build(const std::vector<corpus::Post>& posts, int min_count);
};

struct TextTrainConfig {
    int dim = 50;
    double lr0 = 0.1;  // decays linearly to 0 across planned updates
    int epochs = 20;
    int min_count = 2;
    int patience = 3;  // early stopping on dev macro-F1
    bool output_bias = true;
    bool normalize_embedding = false;  // optional L2 normalization of x_n
    uint64_t seed = 0;
};

// The linear text classifier: lookup table A (V x d), output transform
// B (d x k), optional output bias.
struct TextModel {
    TextVocab vocab;
    corpus::LabelVocabulary labels;
    Matrix A;  // V x d
    Matrix B;  // d x k
    std::vector<double> bias;  // k, all-zero when disabled
    int dim = 0;
    bool normalize_embedding = false;

    int k() const { return labels.k(); }
};

struct BagOfFeatures {
    std::vector<double> h;
    int token_count = 0;  // in-vocab tokens only
};

// Mean of lookup rows over in-vocab tokens; all-OOV input yields the zero
// vector with token_count 0.
BagOfFeatures bag_of_features(const std::vector<std::string>& tokens,
                              const TextModel& model);

// softmax(B^T h + bias).
std::vector<double> forward(const std::vector<double>& h, const TextModel& model);

// -(1/N) sum log p(gold). Throws on an empty batch.
double nll_loss(const std::vector<corpus::Post>& batch, const TextModel& model);

struct TextGradients {
    Matrix dA;  // V x d
    Matrix dB;  // d x k
    std::vector<double> dbias;
};

// Analytic batch gradient of nll_loss with respect to A, B and the bias.
TextGradients nll_grad(const std::vector<corpus::Post>& batch, const TextModel& model);

// SGD over shuffled examples with linear lr decay; returns the parameters
// with the best dev macro-F1.
TextModel train_text(const std::vector<corpus::Post>& train,
                     const std::vector<corpus::Post>& dev,
                     const corpus::LabelVocabulary& labels,
                     const TextTrainConfig& config);

// The fusion-ready text embedding (BagOfFeatures.h, optionally normalized).
std::vector<double> embed_text(const std::string& text, const TextModel& model);

std::vector<double> predict_text(const std::string& text, const TextModel& model);

// Labels by descending probability, ties broken by lower vocab index.
std::vector<std::pair<std::string, double>> predict_topk_text(
    const std::string& text, const TextModel& model, int m);

void save_text_model(const TextModel& model, const std::string& path);
TextModel load_text_model(const std::string& path);

}  // namespace emojipred::text
