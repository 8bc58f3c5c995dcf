#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "emojipred/fusion.hpp"

namespace fs = std::filesystem;

namespace emojipred::fusion {

std::vector<double> pipeline_features(const Pipeline& pipe, const corpus::Post& post,
                                      const vision::PrecomputedEmbeddingTable* table) {
    switch (pipe.mode) {
        case Modality::Text:
            return text::embed_text(post.text, *pipe.text_model);
        case Modality::Visual:
            return vision::visual_embedding(post, table, pipe.featurizer_grid).values;
        case Modality::Multimodal:
            return concat(text::embed_text(post.text, *pipe.text_model),
                          vision::visual_embedding(post, table, pipe.featurizer_grid)
                              .values)
                .values;
    }
    throw std::logic_error("pipeline_features: bad mode");
}

std::vector<double> pipeline_predict(const Pipeline& pipe, const corpus::Post& post,
                                     const vision::PrecomputedEmbeddingTable* table) {
    return predict(pipe.classifier, pipeline_features(pipe, post, table));
}

namespace {

int argmax_low(const std::vector<double>& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

// Dev selection works on already-standardized features, so score directly.
double dev_f1_of(const LogRegParams& params,
                 const std::vector<std::vector<double>>& X,
                 const std::vector<int>& y, int k) {
    LogRegParams raw = params;
    raw.stats = StandardizeStats{};  // identity
    std::vector<int> pred(y.size());
    for (size_t i = 0; i < X.size(); ++i) pred[i] = argmax_low(predict(raw, X[i]));
    return eval::macro_prf(eval::confusion_matrix(y, pred, k)).f1;
}

}  // namespace

SystemRun run_system(Modality mode, const corpus::DatasetSplit& data,
                     const corpus::LabelVocabulary& labels,
                     const RunSystemConfig& config,
                     const vision::PrecomputedEmbeddingTable* table) {
    SystemRun run;
    Pipeline& pipe = run.pipeline;
    pipe.mode = mode;
    pipe.labels = labels;
    pipe.featurizer_grid = config.featurizer_grid;

    if (mode == Modality::Text || mode == Modality::Multimodal)
        pipe.text_model = text::train_text(data.train, data.dev, labels, config.text);

    auto features_of = [&](const std::vector<corpus::Post>& posts) {
        std::vector<FeatureVector> out;
        out.reserve(posts.size());
        for (const auto& p : posts) {
            FeatureVector f;
            f.tag = mode;
            f.values = pipeline_features(pipe, p, table);
            out.push_back(std::move(f));
        }
        return out;
    };
    auto labels_of = [&](const std::vector<corpus::Post>& posts) {
        std::vector<int> out;
        out.reserve(posts.size());
        for (const auto& p : posts) {
            int idx = labels.index_of(p.label);
            if (idx < 0)
                throw std::invalid_argument("run_system: label not in vocabulary: " +
                                            p.label);
            out.push_back(idx);
        }
        return out;
    };

    auto train_feats = features_of(data.train);
    auto dev_feats = features_of(data.dev);
    auto y_train = labels_of(data.train);
    auto y_dev = labels_of(data.dev);

    StandardizeStats stats;
    if (config.standardize_features) {
        stats = standardize(train_feats);
        for (auto& f : dev_feats) f.values = apply_standardize(stats, f.values);
    }
    std::vector<std::vector<double>> X_train, X_dev;
    for (auto& f : train_feats) X_train.push_back(std::move(f.values));
    for (auto& f : dev_feats) X_dev.push_back(std::move(f.values));

    const int k = labels.k();
    double best_f1 = -1.0;
    LogRegParams best_params;
    for (double lambda : config.lambda_grid) {
        auto params = train_logreg(X_train, y_train, k, lambda, config.logreg);
        double f1 = y_dev.empty() ? 0.0 : dev_f1_of(params, X_dev, y_dev, k);
        if (f1 > best_f1) {
            best_f1 = f1;
            best_params = params;
            run.best_lambda = lambda;
        }
    }
    best_params.stats = stats;
    pipe.classifier = std::move(best_params);

    // Raw-space head over the featurizer channels doubles as the CAM head.
    if (mode == Modality::Visual) {
        bool cam_compatible = !X_train.empty() &&
                              pipe.classifier.W.rows() == size_t(vision::kFeatureChannels);
        if (cam_compatible) {
            vision::VisionTrainConfig vc;
            vc.grid = config.featurizer_grid;
            pipe.vision_head =
                vision::train_vision_head(data.train, data.dev, labels, vc, table);
        }
    }

    std::vector<int> gold, pred;
    for (const auto& p : data.test) {
        int g = labels.index_of(p.label);
        if (g < 0) continue;
        gold.push_back(g);
        pred.push_back(argmax_low(pipeline_predict(pipe, p, table)));
    }
    run.test_confusion = eval::confusion_matrix(gold, pred, k);
    run.test_metrics = eval::metrics_report(run.test_confusion, labels.labels);
    return run;
}

void save_pipeline(const Pipeline& pipe, const std::string& dir) {
    fs::path target(dir);
    fs::path staging(dir + ".staging");
    fs::remove_all(staging);
    fs::create_directories(staging);

    nlohmann::json j;
    j["format_version"] = 1;
    j["kind"] = "pipeline";
    j["mode"] = to_string(pipe.mode);
    j["featurizer_grid"] = pipe.featurizer_grid;
    j["labels"] = pipe.labels.labels;
    j["label_counts"] = pipe.labels.counts;
    j["has_text_model"] = pipe.text_model.has_value();
    j["has_vision_head"] = pipe.vision_head.has_value();
    {
        std::ofstream f(staging / "pipeline.json", std::ios::binary);
        if (!f) throw std::runtime_error("save_pipeline: cannot write " + dir);
        f << j.dump(2) << "\n";
    }
    save_logreg(pipe.classifier, (staging / "classifier.json").string());
    if (pipe.text_model)
        text::save_text_model(*pipe.text_model, (staging / "text_model.json").string());
    if (pipe.vision_head)
        vision::save_vision_head(*pipe.vision_head,
                                 (staging / "vision_head.json").string());

    fs::remove_all(target);
    fs::rename(staging, target);
}

Pipeline load_pipeline(const std::string& dir) {
    fs::path base(dir);
    std::ifstream f(base / "pipeline.json");
    if (!f) throw std::runtime_error("load_pipeline: cannot open " + dir);
    nlohmann::json j = nlohmann::json::parse(f);
    if (j.value("kind", std::string()) != "pipeline")
        throw std::runtime_error("load_pipeline: not a pipeline directory: " + dir);
    Pipeline pipe;
    pipe.mode = modality_from_string(j.at("mode").get<std::string>());
    pipe.featurizer_grid = j.at("featurizer_grid").get<int>();
    pipe.labels.labels = j.at("labels").get<std::vector<std::string>>();
    pipe.labels.counts = j.at("label_counts").get<std::vector<long long>>();
    pipe.classifier = load_logreg((base / "classifier.json").string());
    if (j.at("has_text_model").get<bool>())
        pipe.text_model = text::load_text_model((base / "text_model.json").string());
    if (j.at("has_vision_head").get<bool>())
        pipe.vision_head = vision::load_vision_head((base / "vision_head.json").string());
    return pipe;
}

}  // namespace emojipred::fusion
