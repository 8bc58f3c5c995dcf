#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "emojipred/corpus.hpp"
#include "emojipred/matrix.hpp"

namespace emojipred::vision {

// RGB floats in [0,1], row-major.
struct ImageTensor {
    int height = 0;
    int width = 0;
    std::vector<double> rgb;  // height*width*3

    double at(int y, int x, int c) const { return rgb[(size_t(y) * width + x) * 3 + c]; }
    double& at(int y, int x, int c) { return rgb[(size_t(y) * width + x) * 3 + c]; }
};

// Fixed per-tile descriptors over a G x G grid. Channel order: mean R,
// mean G, mean B, luminance std, horizontal gradient energy, vertical
// gradient energy, mean saturation, max brightness.
inline constexpr int kFeatureChannels = 8;

struct FeatureMaps {
    int grid = 0;
    int channels = kFeatureChannels;
    std::vector<double> v;  // channels * grid * grid

    double at(int ch, int gy, int gx) const {
        return v[(size_t(ch) * grid + gy) * grid + gx];
    }
    double& at(int ch, int gy, int gx) {
        return v[(size_t(ch) * grid + gy) * grid + gx];
    }
};

struct VisionHeadParams {
    Matrix W;                // channels x k
    std::vector<double> b;   // k
};

struct PrecomputedEmbeddingTable {
    int dim = 0;
    std::unordered_map<std::string, std::vector<double>> vectors;
};

struct VisionTrainConfig {
    double lr = 0.5;
    int epochs = 200;
    int patience = 10;
    double lambda = 0.0;
    int grid = 8;
    uint64_t seed = 0;
};

// PPM P3/P6 reader; errors report the byte offset.
ImageTensor load_image(const std::string& path);
void save_image_ppm(const ImageTensor& img, const std::string& path);

// Throws if the image is smaller than the grid. Remainder pixels go to the
// last row/column tiles.
FeatureMaps compute_feature_maps(const ImageTensor& img, int grid);

// Per-channel spatial mean.
std::vector<double> global_average_pool(const FeatureMaps& maps);

enum class EmbeddingSource { Table, InlineVector, Featurizer };

struct VisualEmbedding {
    std::vector<double> values;
    EmbeddingSource source = EmbeddingSource::Featurizer;
};

// Precedence: precomputed table entry, then the post's inline vector, then
// the built-in featurizer over the post's image. Throws when no source is
// available.
VisualEmbedding visual_embedding(const corpus::Post& post,
                                 const PrecomputedEmbeddingTable* table,
                                 int grid = 8);

// Multinomial logistic regression on the visual embeddings, gradient
// descent with early stopping on dev macro-F1. Weights live in raw feature
// space so they double as CAM weights.
VisionHeadParams train_vision_head(const std::vector<corpus::Post>& train,
                                   const std::vector<corpus::Post>& dev,
                                   const corpus::LabelVocabulary& labels,
                                   const VisionTrainConfig& config,
                                   const PrecomputedEmbeddingTable* table = nullptr);

std::vector<double> vision_head_scores(const VisionHeadParams& head,
                                       const std::vector<double>& embedding);
std::vector<double> vision_head_predict(const VisionHeadParams& head,
                                        const std::vector<double>& embedding);

// M_c(i,j) = sum_ch W[ch][c] * f_ch(i,j), returned as a G x G matrix.
Matrix class_activation_map(const FeatureMaps& maps, const VisionHeadParams& head,
                            int cls);

// Min-max normalized to [0,255] PGM P5; constant maps render mid-gray 128.
void render_heatmap(const Matrix& heatmap, const std::string& path);

struct PgmImage {
    int height = 0, width = 0;
    std::vector<unsigned char> pixels;
};
PgmImage load_pgm(const std::string& path);

// Line 1 `dim=<N>`, then `<id>\t<f1>\t...\t<fN>`. Dim mismatch errors name
// the row.
PrecomputedEmbeddingTable load_embedding_table(const std::string& path);
void save_embedding_table(const PrecomputedEmbeddingTable& table,
                          const std::string& path);

void save_vision_head(const VisionHeadParams& head, const std::string& path);
VisionHeadParams load_vision_head(const std::string& path);

}  // namespace emojipred::vision
