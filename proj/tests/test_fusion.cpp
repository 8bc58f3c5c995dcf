#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "emojipred/corpus.hpp"
#include "emojipred/fusion.hpp"

using namespace emojipred;
using fusion::FeatureVector;
using fusion::LogRegConfig;
using fusion::LogRegParams;

namespace {

struct ToyData {
    std::vector<std::vector<double>> X;
    std::vector<int> y;
    int k;
};

ToyData separable_2class(int n, uint64_t seed) {
    ToyData d;
    d.k = 2;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.3);
    for (int i = 0; i < n; ++i) {
        int c = i % 2;
        double cx = c == 0 ? -2.0 : 2.0;
        d.X.push_back({cx + noise(rng), noise(rng)});
        d.y.push_back(c);
    }
    return d;
}

ToyData random_toy(int n, int dim, int k, uint64_t seed) {
    ToyData d;
    d.k = k;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < n; ++i) {
        std::vector<double> x(dim);
        for (double& v : x) v = u(rng);
        d.X.push_back(x);
        d.y.push_back(int(rng() % k));
    }
    return d;
}

double frob_norm(const Matrix& W) {
    double s = 0;
    for (double w : W.data()) s += w * w;
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("concat") {
    std::vector<double> text(50), vis(8);
    for (size_t i = 0; i < text.size(); ++i) text[i] = double(i);
    for (size_t i = 0; i < vis.size(); ++i) vis[i] = 100.0 + double(i);

    auto f = fusion::concat(text, vis);
    CHECK(f.dim() == 58);
    CHECK(f.tag == fusion::Modality::Multimodal);
    for (int i = 0; i < 50; ++i) CHECK(f.values[i] == text[i]);
    for (int i = 0; i < 8; ++i) CHECK(f.values[50 + i] == vis[i]);

    SUBCASE("empty visual part is the identity") {
        auto g = fusion::concat(text, {});
        CHECK(g.values == text);
    }
    SUBCASE("slicing recovers both parts exactly") {
        std::vector<double> back_text(f.values.begin(), f.values.begin() + 50);
        std::vector<double> back_vis(f.values.begin() + 50, f.values.end());
        CHECK(back_text == text);
        CHECK(back_vis == vis);
    }
    SUBCASE("non-finite input throws") {
        CHECK_THROWS(fusion::concat({std::nan("")}, vis));
    }
}

TEST_CASE("standardize") {
    SUBCASE("fewer than two samples throws") {
        std::vector<FeatureVector> one(1);
        one[0].values = {1.0};
        CHECK_THROWS(fusion::standardize(one));
    }
    SUBCASE("constant feature passes through unchanged") {
        std::vector<FeatureVector> feats(3);
        for (auto& f : feats) f.values = {5.0, 0.0};
        feats[0].values[1] = -1;
        feats[1].values[1] = 0;
        feats[2].values[1] = 1;
        auto stats = fusion::standardize(feats);
        for (const auto& f : feats) CHECK(f.values[0] == 5.0);
        CHECK(stats.stddev[0] == 1.0);
        CHECK(stats.mean[0] == 0.0);
    }
    SUBCASE("post-hoc moments are zero mean unit std") {
        std::mt19937_64 rng(4);
        std::normal_distribution<double> g(3.0, 2.0);
        std::vector<FeatureVector> feats(200);
        for (auto& f : feats) {
            f.values.resize(5);
            for (double& v : f.values) v = g(rng);
        }
        fusion::standardize(feats);
        for (int j = 0; j < 5; ++j) {
            double mean = 0, var = 0;
            for (const auto& f : feats) mean += f.values[j];
            mean /= feats.size();
            for (const auto& f : feats) var += (f.values[j] - mean) * (f.values[j] - mean);
            var /= feats.size();
            CHECK(std::abs(mean) <= 1e-10);
            CHECK(std::abs(std::sqrt(var) - 1.0) <= 1e-10);
        }
    }
    SUBCASE("dev uses the train moments, not its own") {
        std::vector<FeatureVector> train(2);
        train[0].values = {0.0};
        train[1].values = {2.0};  // mean 1, std 1
        auto stats = fusion::standardize(train);
        auto dev = fusion::apply_standardize(stats, {11.0});
        CHECK(dev[0] == doctest::Approx(10.0));
    }
}

TEST_CASE("logreg gradient matches central finite differences") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1, 1);
    const double eps = 1e-5;
    for (int trial = 0; trial < 20; ++trial) {
        int dim = 2 + int(rng() % 4);
        int k = 2 + int(rng() % 3);
        auto d = random_toy(10, dim, k, rng());
        double lambda = (trial % 3) * 0.05;
        Matrix W(dim, k);
        std::vector<double> b(k);
        for (double& w : W.data()) w = u(rng);
        for (double& v : b) v = u(rng);

        Matrix gW;
        std::vector<double> gb;
        fusion::logreg_loss_grad(d.X, d.y, k, W, b, lambda, &gW, &gb);

        double worst = 0;
        auto rel = [](double a, double f) {
            return std::abs(a - f) / std::max({std::abs(a), std::abs(f), 1e-8});
        };
        for (size_t i = 0; i < W.data().size(); ++i) {
            Matrix plus = W, minus = W;
            plus.data()[i] += eps;
            minus.data()[i] -= eps;
            double fd = (fusion::logreg_loss_grad(d.X, d.y, k, plus, b, lambda,
                                                  nullptr, nullptr) -
                         fusion::logreg_loss_grad(d.X, d.y, k, minus, b, lambda,
                                                  nullptr, nullptr)) /
                        (2 * eps);
            worst = std::max(worst, rel(gW.data()[i], fd));
        }
        for (size_t i = 0; i < b.size(); ++i) {
            auto plus = b, minus = b;
            plus[i] += eps;
            minus[i] -= eps;
            double fd = (fusion::logreg_loss_grad(d.X, d.y, k, W, plus, lambda,
                                                  nullptr, nullptr) -
                         fusion::logreg_loss_grad(d.X, d.y, k, W, minus, lambda,
                                                  nullptr, nullptr)) /
                        (2 * eps);
            worst = std::max(worst, rel(gb[i], fd));
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("train_logreg") {
    SUBCASE("separable 2-class toy set reaches >= 0.99 accuracy at lambda=0") {
        auto d = separable_2class(100, 3);
        auto params = fusion::train_logreg(d.X, d.y, d.k, 0.0, LogRegConfig{});
        int hits = 0;
        for (size_t i = 0; i < d.X.size(); ++i) {
            auto p = fusion::predict(params, d.X[i]);
            if ((p[1] > p[0]) == (d.y[i] == 1)) ++hits;
        }
        CHECK(double(hits) / d.X.size() >= 0.99);
    }
    SUBCASE("regularization shrinks the weights") {
        auto d = separable_2class(100, 5);
        auto loose = fusion::train_logreg(d.X, d.y, d.k, 0.0, LogRegConfig{});
        auto tight = fusion::train_logreg(d.X, d.y, d.k, 10.0, LogRegConfig{});
        CHECK(frob_norm(tight.W) < frob_norm(loose.W));
    }
    SUBCASE("monotone in lambda") {
        auto d = random_toy(60, 4, 3, 6);
        double prev = 1e18;
        for (double lambda : {0.0, 0.01, 0.1, 1.0}) {
            auto p = fusion::train_logreg(d.X, d.y, d.k, lambda, LogRegConfig{});
            double norm = frob_norm(p.W);
            CHECK(norm <= prev + 1e-9);
            prev = norm;
        }
    }
    SUBCASE("convexity: two random starts agree in final loss within 1e-6") {
        auto d = random_toy(80, 5, 3, 8);
        LogRegConfig a, b;
        a.init_scale = 0.5;
        a.seed = 1;
        b.init_scale = 0.5;
        b.seed = 999;
        a.max_iters = b.max_iters = 5000;
        double lambda = 0.01;  // strongly convex
        auto pa = fusion::train_logreg(d.X, d.y, d.k, lambda, a);
        auto pb = fusion::train_logreg(d.X, d.y, d.k, lambda, b);
        double la = fusion::logreg_final_loss(d.X, d.y, pa);
        double lb = fusion::logreg_final_loss(d.X, d.y, pb);
        CHECK(std::abs(la - lb) < 1e-6);
    }
}

TEST_CASE("predict") {
    SUBCASE("zero params give uniform") {
        LogRegParams p;
        p.W = Matrix(3, 4);
        p.b.assign(4, 0.0);
        auto probs = fusion::predict(p, {1.0, -2.0, 0.5});
        for (double v : probs) CHECK(v == doctest::Approx(0.25));
    }
    SUBCASE("lambda does not affect prediction") {
        auto d = separable_2class(50, 2);
        auto params = fusion::train_logreg(d.X, d.y, d.k, 0.1, LogRegConfig{});
        auto a = fusion::predict(params, d.X[0]);
        params.lambda *= 2;
        auto b = fusion::predict(params, d.X[0]);
        CHECK(a == b);
    }
    SUBCASE("argmax invariant under constant score shifts") {
        LogRegParams p;
        p.W = Matrix(2, 3);
        p.W(0, 0) = 1.0;
        p.W(1, 1) = -0.5;
        p.W(0, 2) = 0.3;
        p.b = {0.1, 0.2, 0.3};
        auto before = fusion::predict(p, {0.7, -0.4});
        for (double& v : p.b) v += 11.0;
        auto after = fusion::predict(p, {0.7, -0.4});
        int amax_before = int(std::max_element(before.begin(), before.end()) - before.begin());
        int amax_after = int(std::max_element(after.begin(), after.end()) - after.begin());
        CHECK(amax_before == amax_after);
    }
    SUBCASE("matches an independent long-double oracle to 1e-8") {
        std::mt19937_64 rng(31);
        std::uniform_real_distribution<double> u(-2, 2);
        LogRegParams p;
        p.W = Matrix(4, 3);
        p.b.resize(3);
        for (double& w : p.W.data()) w = u(rng);
        for (double& v : p.b) v = u(rng);
        p.stats.mean = {0.1, -0.2, 0.3, 0.0};
        p.stats.stddev = {1.5, 0.5, 2.0, 1.0};
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> x(4);
            for (double& v : x) v = u(rng);
            auto got = fusion::predict(p, x);
            // Oracle: standardize, score, softmax, all in long double.
            std::vector<long double> s(3);
            for (int c = 0; c < 3; ++c) {
                long double acc = p.b[c];
                for (int j = 0; j < 4; ++j) {
                    long double z = ((long double)x[j] - p.stats.mean[j]) /
                                    p.stats.stddev[j];
                    acc += (long double)p.W(j, c) * z;
                }
                s[c] = acc;
            }
            long double mx = std::max({s[0], s[1], s[2]});
            long double sum = 0;
            for (auto& v : s) {
                v = std::exp(v - mx);
                sum += v;
            }
            for (int c = 0; c < 3; ++c) CHECK(std::abs(got[c] - double(s[c] / sum)) < 1e-8);
        }
    }
    SUBCASE("dim mismatch throws") {
        LogRegParams p;
        p.W = Matrix(3, 2);
        p.b.assign(2, 0.0);
        CHECK_THROWS(fusion::predict(p, {1.0, 2.0}));
    }
    SUBCASE("predict_topk orders by probability with stable ties") {
        LogRegParams p;
        p.W = Matrix(2, 4);
        p.b.assign(4, 0.0);
        auto top = fusion::predict_topk(p, {0.0, 0.0}, 4);
        for (int i = 0; i < 4; ++i) CHECK(top[i].first == i);
    }
}

namespace {

corpus::DatasetSplit synthetic_split(int k, int n, std::vector<int> text_cls,
                                     std::vector<int> img_cls, double noise,
                                     uint64_t seed) {
    corpus::SyntheticSpec spec;
    spec.k = k;
    spec.n = n;
    spec.text_signal_classes = std::move(text_cls);
    spec.image_signal_classes = std::move(img_cls);
    spec.noise_rate = noise;
    spec.seed = seed;
    return corpus::split(corpus::generate_synthetic(spec), seed);
}

fusion::RunSystemConfig fast_config() {
    fusion::RunSystemConfig cfg;
    cfg.text.dim = 16;
    cfg.text.epochs = 8;
    cfg.text.min_count = 1;
    cfg.logreg.max_iters = 200;
    cfg.lambda_grid = {0.0, 1e-2};
    return cfg;
}

}  // namespace

TEST_CASE("run_system: multimodal beats both unimodal systems on disjoint signals") {
    auto split = synthetic_split(4, 800, {0, 1}, {2, 3}, 0.05, 11);
    auto vocab = corpus::build_label_vocab(split.train, 4);
    auto cfg = fast_config();

    auto tex = fusion::run_system(fusion::Modality::Text, split, vocab, cfg);
    auto vis = fusion::run_system(fusion::Modality::Visual, split, vocab, cfg);
    auto mul = fusion::run_system(fusion::Modality::Multimodal, split, vocab, cfg);

    CHECK(mul.test_metrics.macro.f1 > tex.test_metrics.macro.f1);
    CHECK(mul.test_metrics.macro.f1 > vis.test_metrics.macro.f1);
}

TEST_CASE("run_system: textual mode ignores images entirely") {
    auto split = synthetic_split(3, 300, {0, 1, 2}, {0, 1, 2}, 0.0, 13);
    auto vocab = corpus::build_label_vocab(split.train, 3);
    auto cfg = fast_config();

    auto with_images = fusion::run_system(fusion::Modality::Text, split, vocab, cfg);
    corpus::DatasetSplit stripped = split;
    for (auto* part : {&stripped.train, &stripped.dev, &stripped.test})
        for (auto& p : *part) {
            p.visual_vec.reset();
            p.image_ref.reset();
        }
    auto without = fusion::run_system(fusion::Modality::Text, stripped, vocab, cfg);
    CHECK(with_images.test_metrics.macro.f1 == without.test_metrics.macro.f1);
    CHECK(with_images.pipeline.classifier.W == without.pipeline.classifier.W);
}

TEST_CASE("run_system: missing modality errors") {
    auto split = synthetic_split(3, 100, {0, 1, 2}, {0, 1, 2}, 0.0, 17);
    for (auto* part : {&split.train, &split.dev, &split.test})
        for (auto& p : *part) {
            p.visual_vec.reset();
            p.image_ref.reset();
        }
    auto vocab = corpus::build_label_vocab(split.train, 3);
    CHECK_THROWS(
        fusion::run_system(fusion::Modality::Visual, split, vocab, fast_config()));
}

TEST_CASE("pipeline save/load round-trips bit-exactly") {
    auto split = synthetic_split(3, 200, {0, 1, 2}, {0, 1, 2}, 0.0, 19);
    auto vocab = corpus::build_label_vocab(split.train, 3);
    auto run = fusion::run_system(fusion::Modality::Multimodal, split, vocab,
                                  fast_config());

    const std::string dir = "test_fusion_pipeline";
    fusion::save_pipeline(run.pipeline, dir);
    auto loaded = fusion::load_pipeline(dir);
    CHECK(loaded.mode == run.pipeline.mode);
    CHECK(loaded.classifier.W == run.pipeline.classifier.W);
    CHECK(loaded.classifier.b == run.pipeline.classifier.b);
    CHECK(loaded.classifier.stats.mean == run.pipeline.classifier.stats.mean);
    CHECK(loaded.classifier.stats.stddev == run.pipeline.classifier.stats.stddev);
    REQUIRE(loaded.text_model.has_value());
    CHECK(loaded.text_model->A == run.pipeline.text_model->A);
    CHECK(loaded.text_model->B == run.pipeline.text_model->B);
    CHECK(loaded.labels.labels == run.pipeline.labels.labels);

    // Predictions agree exactly after the round trip.
    for (const auto& p : split.test) {
        CHECK(fusion::pipeline_predict(loaded, p, nullptr) ==
              fusion::pipeline_predict(run.pipeline, p, nullptr));
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("logreg file round-trip") {
    auto d = separable_2class(50, 23);
    auto params = fusion::train_logreg(d.X, d.y, d.k, 0.01, LogRegConfig{});
    params.stats.mean = {0.5, -0.5};
    params.stats.stddev = {2.0, 1.0};
    const std::string path = "test_fusion_logreg.json";
    fusion::save_logreg(params, path);
    auto loaded = fusion::load_logreg(path);
    CHECK(loaded.W == params.W);
    CHECK(loaded.b == params.b);
    CHECK(loaded.lambda == params.lambda);
    CHECK(loaded.stats.mean == params.stats.mean);
    CHECK(loaded.stats.stddev == params.stats.stddev);
    std::remove(path.c_str());
}
