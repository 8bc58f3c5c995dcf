#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "emojipred/corpus.hpp"
#include "emojipred/eval.hpp"
#include "emojipred/matrix.hpp"
#include "emojipred/text_model.hpp"
#include "emojipred/vision.hpp"

namespace emojipred::fusion {

enum class Modality { Text, Visual, Multimodal };

const char* to_string(Modality m);
Modality modality_from_string(const std::string& s);

struct FeatureVector {
    std::vector<double> values;
    Modality tag = Modality::Text;

    int dim() const { return static_cast<int>(values.size()); }
};

// Text features first, visual second.
FeatureVector concat(const std::vector<double>& text_emb,
                     const std::vector<double>& vis_emb);

// Per-feature train moments; near-constant features pass through unscaled.
struct StandardizeStats {
    std::vector<double> mean;
    std::vector<double> stddev;  // 1.0 for features with std < 1e-12
};

// Computes train moments and standardizes in place. Throws with < 2 samples.
StandardizeStats standardize(std::vector<FeatureVector>& features);
std::vector<double> apply_standardize(const StandardizeStats& stats,
                                      const std::vector<double>& values);

struct LogRegParams {
    Matrix W;  // dim x k
    std::vector<double> b;
    double lambda = 0.0;
    StandardizeStats stats;  // identity when standardization is off
};

struct LogRegConfig {
    int max_iters = 500;
    double grad_tol = 1e-6;
    double init_scale = 0.0;  // 0 = zero init
    uint64_t seed = 0;
};

// NLL + (lambda/2)||W||_F^2 (bias unregularized) and its gradient, exposed
// for the finite-difference checks.
double logreg_loss_grad(const std::vector<std::vector<double>>& X,
                        const std::vector<int>& y, int k, const Matrix& W,
                        const std::vector<double>& b, double lambda,
                        Matrix* grad_W, std::vector<double>* grad_b);

// Full-batch gradient descent with backtracking line search; stops when the
// gradient norm drops below grad_tol or at max_iters. Deterministic for a
// fixed seed. The returned params carry identity stats; the caller fills
// them in when standardization is used.
LogRegParams train_logreg(const std::vector<std::vector<double>>& X,
                          const std::vector<int>& y, int k, double lambda,
                          const LogRegConfig& config);

double logreg_final_loss(const std::vector<std::vector<double>>& X,
                         const std::vector<int>& y, const LogRegParams& params);

// Applies the stored stats to a raw feature, then softmax(W^T x + b).
std::vector<double> predict(const LogRegParams& params,
                            const std::vector<double>& feature);
std::vector<std::pair<int, double>> predict_topk(const LogRegParams& params,
                                                 const std::vector<double>& feature,
                                                 int m);

void save_logreg(const LogRegParams& params, const std::string& path);
LogRegParams load_logreg(const std::string& path);

// --- run_system: the three systems of the evaluation protocol ---

struct RunSystemConfig {
    text::TextTrainConfig text;
    LogRegConfig logreg;
    std::vector<double> lambda_grid = {0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0};
    int featurizer_grid = 8;
    bool standardize_features = true;
};

// A trained end-to-end pipeline for one modality.
struct Pipeline {
    Modality mode = Modality::Text;
    std::optional<text::TextModel> text_model;
    std::optional<vision::VisionHeadParams> vision_head;  // raw-space, for CAM
    LogRegParams classifier;
    corpus::LabelVocabulary labels;
    int featurizer_grid = 8;
};

struct SystemRun {
    Pipeline pipeline;
    eval::MetricsReport test_metrics;
    eval::ConfusionMatrix test_confusion{0};
    double best_lambda = 0.0;
};

// Extracts this pipeline's feature vector for one post.
std::vector<double> pipeline_features(const Pipeline& pipe, const corpus::Post& post,
                                      const vision::PrecomputedEmbeddingTable* table);
std::vector<double> pipeline_predict(const Pipeline& pipe, const corpus::Post& post,
                                     const vision::PrecomputedEmbeddingTable* table);

// Trains the unimodal embedders as needed, selects lambda on dev over the
// grid, trains the final classifier on train, and evaluates on test.
SystemRun run_system(Modality mode, const corpus::DatasetSplit& data,
                     const corpus::LabelVocabulary& labels,
                     const RunSystemConfig& config,
                     const vision::PrecomputedEmbeddingTable* table = nullptr);

// A pipeline persists as a directory: pipeline.json plus one file per
// trained component. Written atomically (staged then renamed).
void save_pipeline(const Pipeline& pipe, const std::string& dir);
Pipeline load_pipeline(const std::string& dir);

}  // namespace emojipred::fusion
