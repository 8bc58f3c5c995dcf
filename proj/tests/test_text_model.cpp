#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "emojipred/corpus.hpp"
#include "emojipred/text_model.hpp"

using namespace emojipred;
using corpus::Post;

namespace {

// Independent high-precision softmax in long double.
std::vector<double> oracle_softmax(const std::vector<long double>& scores) {
    long double mx = *std::max_element(scores.begin(), scores.end());
    long double sum = 0.0L;
    std::vector<long double> e(scores.size());
    for (size_t i = 0; i < scores.size(); ++i) {
        e[i] = std::exp(scores[i] - mx);
        sum += e[i];
    }
    std::vector<double> out(scores.size());
    for (size_t i = 0; i < scores.size(); ++i) out[i] = double(e[i] / sum);
    return out;
}

Post make_post(const std::string& text, const std::string& label) {
    Post p;
    p.id = text;
    p.text = text;
    p.label = label;
    return p;
}

// A small model with a hand-filled vocabulary.
text::TextModel tiny_model(int V, int d, int k, uint64_t seed) {
    text::TextModel m;
    m.dim = d;
    for (int i = 0; i < V; ++i) m.vocab.index["w" + std::to_string(i)] = i;
    for (int c = 0; c < k; ++c) {
        m.labels.labels.push_back("e" + std::to_string(c));
        m.labels.counts.push_back(1);
    }
    m.A = Matrix(V, d);
    m.B = Matrix(d, k);
    m.bias.assign(k, 0.0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& x : m.A.data()) x = u(rng);
    for (double& x : m.B.data()) x = u(rng);
    for (double& x : m.bias) x = u(rng);
    return m;
}

double max_rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace

TEST_CASE("tokenize") {
    CHECK(text::tokenize("Love my new home!") ==
          std::vector<std::string>{"love", "my", "new", "home"});
    CHECK(text::tokenize("#myboys #mommy") ==
          std::vector<std::string>{"#myboys", "#mommy"});
    CHECK(text::tokenize("").empty());
    CHECK(text::tokenize("  \t \n ").empty());
    CHECK(text::tokenize("@User, hi!!") == std::vector<std::string>{"@user", "hi"});
    CHECK(text::tokenize("...") .empty());
    CHECK(text::tokenize("don't stop") == std::vector<std::string>{"don't", "stop"});
}

TEST_CASE("bag_of_features") {
    auto m = tiny_model(5, 4, 3, 1);
    SUBCASE("single in-vocab token is its lookup row") {
        auto bag = text::bag_of_features({"w2"}, m);
        CHECK(bag.token_count == 1);
        for (int j = 0; j < 4; ++j) CHECK(bag.h[j] == m.A(2, j));
    }
    SUBCASE("duplicated token keeps the mean") {
        auto one = text::bag_of_features({"w1"}, m);
        auto two = text::bag_of_features({"w1", "w1"}, m);
        for (int j = 0; j < 4; ++j) CHECK(two.h[j] == doctest::Approx(one.h[j]));
    }
    SUBCASE("order invariance") {
        auto a = text::bag_of_features({"w0", "w3", "w1"}, m);
        auto b = text::bag_of_features({"w1", "w0", "w3"}, m);
        CHECK(a.h == b.h);
    }
    SUBCASE("OOV tokens are skipped, all-OOV gives zero vector") {
        auto mixed = text::bag_of_features({"w1", "nope"}, m);
        CHECK(mixed.token_count == 1);
        auto none = text::bag_of_features({"nope", "nada"}, m);
        CHECK(none.token_count == 0);
        for (double x : none.h) CHECK(x == 0.0);
    }
}

TEST_CASE("forward") {
    SUBCASE("zero params give uniform") {
        auto m = tiny_model(3, 4, 5, 1);
        std::fill(m.B.data().begin(), m.B.data().end(), 0.0);
        std::fill(m.bias.begin(), m.bias.end(), 0.0);
        auto p = text::forward({0.1, -0.2, 0.3, 0.0}, m);
        for (double x : p) CHECK(x == doctest::Approx(0.2));
    }
    SUBCASE("shift invariance") {
        auto m = tiny_model(3, 4, 5, 2);
        std::vector<double> h = {0.4, -0.1, 0.2, 0.8};
        auto p1 = text::forward(h, m);
        for (double& b : m.bias) b += 3.7;
        auto p2 = text::forward(h, m);
        for (size_t i = 0; i < p1.size(); ++i)
            CHECK(p1[i] == doctest::Approx(p2[i]).epsilon(1e-12));
    }
    SUBCASE("matches a high-precision oracle softmax to 1e-10") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        for (int trial = 0; trial < 20; ++trial) {
            auto m = tiny_model(3, 6, 5, rng());
            std::vector<double> h(6);
            for (double& x : h) x = u(rng);
            auto got = text::forward(h, m);
            std::vector<long double> scores(5);
            for (int c = 0; c < 5; ++c) {
                long double s = m.bias[c];
                for (int j = 0; j < 6; ++j)
                    s += (long double)m.B(j, c) * (long double)h[j];
                scores[c] = s;
            }
            auto want = oracle_softmax(scores);
            double sum = 0.0;
            for (size_t i = 0; i < got.size(); ++i) {
                CHECK(std::abs(got[i] - want[i]) < 1e-10);
                CHECK(got[i] > 0.0);
                sum += got[i];
            }
            CHECK(std::abs(sum - 1.0) < 1e-6);
        }
    }
    SUBCASE("non-finite input throws") {
        auto m = tiny_model(3, 2, 2, 1);
        CHECK_THROWS(text::forward({std::nan(""), 0.0}, m));
    }
}

TEST_CASE("nll_loss") {
    SUBCASE("uniform predictor on k classes is ln k") {
        auto m = tiny_model(4, 3, 20, 1);
        std::fill(m.B.data().begin(), m.B.data().end(), 0.0);
        std::fill(m.bias.begin(), m.bias.end(), 0.0);
        std::vector<Post> batch = {make_post("w0 w1", "e3"), make_post("w2", "e17")};
        CHECK(text::nll_loss(batch, m) ==
              doctest::Approx(std::log(20.0)).epsilon(1e-12));
    }
    SUBCASE("near-perfect predictor is near zero") {
        auto m = tiny_model(4, 3, 4, 1);
        std::fill(m.B.data().begin(), m.B.data().end(), 0.0);
        std::fill(m.bias.begin(), m.bias.end(), 0.0);
        m.bias[2] = 60.0;
        std::vector<Post> batch = {make_post("w0 w1 w2", "e2")};
        CHECK(text::nll_loss(batch, m) < 1e-9);
    }
    SUBCASE("empty batch throws") {
        auto m = tiny_model(4, 3, 4, 1);
        CHECK_THROWS(text::nll_loss({}, m));
    }
}

TEST_CASE("analytic gradient matches central finite differences") {
    std::mt19937_64 rng(11);
    const double eps = 1e-5;
    for (int trial = 0; trial < 20; ++trial) {
        bool normalize = trial % 2 == 1;
        auto m = tiny_model(6, 4, 3, rng());
        m.normalize_embedding = normalize;
        std::vector<Post> batch = {
            make_post("w0 w1 w2", "e0"), make_post("w3 w3 w4", "e1"),
            make_post("w5 w0", "e2"), make_post("w1", "e1")};
        auto grads = text::nll_grad(batch, m);

        double worst = 0.0;
        for (size_t i = 0; i < m.A.data().size(); ++i) {
            auto plus = m, minus = m;
            plus.A.data()[i] += eps;
            minus.A.data()[i] -= eps;
            double fd =
                (text::nll_loss(batch, plus) - text::nll_loss(batch, minus)) / (2 * eps);
            worst = std::max(worst, max_rel_err(fd, grads.dA.data()[i]));
        }
        for (size_t i = 0; i < m.B.data().size(); ++i) {
            auto plus = m, minus = m;
            plus.B.data()[i] += eps;
            minus.B.data()[i] -= eps;
            double fd =
                (text::nll_loss(batch, plus) - text::nll_loss(batch, minus)) / (2 * eps);
            worst = std::max(worst, max_rel_err(fd, grads.dB.data()[i]));
        }
        for (size_t i = 0; i < m.bias.size(); ++i) {
            auto plus = m, minus = m;
            plus.bias[i] += eps;
            minus.bias[i] -= eps;
            double fd =
                (text::nll_loss(batch, plus) - text::nll_loss(batch, minus)) / (2 * eps);
            worst = std::max(worst, max_rel_err(fd, grads.dbias[i]));
        }
        CHECK(worst < 1e-4);
    }
}

namespace {

std::vector<Post> separable_corpus(int k, int per_class) {
    std::vector<Post> posts;
    for (int c = 0; c < k; ++c)
        for (int i = 0; i < per_class; ++i) {
            std::string cue = "cue" + std::to_string(c);
            posts.push_back(make_post(cue + " filler words here " + cue,
                                      "e" + std::to_string(c)));
        }
    return posts;
}

corpus::LabelVocabulary letter_vocab(int k) {
    corpus::LabelVocabulary v;
    for (int c = 0; c < k; ++c) {
        v.labels.push_back("e" + std::to_string(c));
        v.counts.push_back(1);
    }
    return v;
}

}  // namespace

TEST_CASE("train_text") {
    auto posts = separable_corpus(3, 40);
    auto vocab = letter_vocab(3);
    text::TextTrainConfig cfg;
    cfg.dim = 8;
    cfg.epochs = 8;
    cfg.min_count = 1;
    cfg.seed = 7;

    SUBCASE("linearly separable set reaches >= 0.99 train accuracy") {
        auto model = text::train_text(posts, posts, vocab, cfg);
        int correct = 0;
        for (const auto& p : posts) {
            auto probs = text::predict_text(p.text, model);
            int best = 0;
            for (int i = 1; i < 3; ++i)
                if (probs[i] > probs[best]) best = i;
            if (vocab.labels[best] == p.label) ++correct;
        }
        CHECK(double(correct) / posts.size() >= 0.99);
    }
    SUBCASE("same seed gives bit-identical params") {
        auto a = text::train_text(posts, posts, vocab, cfg);
        auto b = text::train_text(posts, posts, vocab, cfg);
        CHECK(a.A == b.A);
        CHECK(a.B == b.B);
        CHECK(a.bias == b.bias);
    }
    SUBCASE("full-batch descent with small lr has a non-increasing loss") {
        // Manual full-batch loop over the public gradient, as a sanity oracle.
        auto m = tiny_model(6, 4, 3, 3);
        for (double& x : m.A.data()) x *= 0.1;
        for (double& x : m.B.data()) x *= 0.1;
        std::fill(m.bias.begin(), m.bias.end(), 0.0);
        std::vector<Post> batch = {make_post("w0 w1", "e0"), make_post("w2 w3", "e1"),
                                   make_post("w4 w5", "e2")};
        double prev = text::nll_loss(batch, m);
        for (int it = 0; it < 50; ++it) {
            auto g = text::nll_grad(batch, m);
            for (size_t i = 0; i < m.A.data().size(); ++i)
                m.A.data()[i] -= 0.05 * g.dA.data()[i];
            for (size_t i = 0; i < m.B.data().size(); ++i)
                m.B.data()[i] -= 0.05 * g.dB.data()[i];
            for (size_t i = 0; i < m.bias.size(); ++i)
                m.bias[i] -= 0.05 * g.dbias[i];
            double cur = text::nll_loss(batch, m);
            CHECK(cur <= prev + 1e-12);
            prev = cur;
        }
    }
}

TEST_CASE("embed_text and prediction consistency") {
    auto posts = separable_corpus(3, 20);
    auto vocab = letter_vocab(3);
    text::TextTrainConfig cfg;
    cfg.dim = 8;
    cfg.epochs = 4;
    cfg.min_count = 1;
    auto model = text::train_text(posts, posts, vocab, cfg);

    SUBCASE("single in-vocab token embeds to its A row") {
        int row = model.vocab.lookup("cue1");
        REQUIRE(row >= 0);
        auto h = text::embed_text("cue1", model);
        for (int j = 0; j < model.dim; ++j) CHECK(h[j] == model.A(row, j));
    }
    SUBCASE("all-OOV text embeds to zero") {
        auto h = text::embed_text("zzz qqq", model);
        for (double x : h) CHECK(x == 0.0);
    }
    SUBCASE("embed then forward equals predict") {
        const std::string s = "cue2 filler words";
        auto via_embed = text::forward(text::embed_text(s, model), model);
        auto direct = text::predict_text(s, model);
        CHECK(via_embed == direct);
    }
}

TEST_CASE("predict_topk_text") {
    auto posts = separable_corpus(4, 15);
    auto vocab = letter_vocab(4);
    text::TextTrainConfig cfg;
    cfg.dim = 6;
    cfg.epochs = 3;
    cfg.min_count = 1;
    auto model = text::train_text(posts, posts, vocab, cfg);

    SUBCASE("m=k is a permutation of all labels") {
        auto top = text::predict_topk_text("cue0 and others", model, 4);
        std::vector<std::string> seen;
        for (auto& [label, prob] : top) seen.push_back(label);
        std::sort(seen.begin(), seen.end());
        CHECK(seen == std::vector<std::string>{"e0", "e1", "e2", "e3"});
        for (size_t i = 1; i < top.size(); ++i) CHECK(top[i - 1].second >= top[i].second);
    }
    SUBCASE("zero scores rank by vocab order") {
        auto m = tiny_model(4, 3, 4, 1);
        std::fill(m.B.data().begin(), m.B.data().end(), 0.0);
        std::fill(m.bias.begin(), m.bias.end(), 0.0);
        auto top = text::predict_topk_text("w0 w1", m, 4);
        for (int i = 0; i < 4; ++i) CHECK(top[i].first == "e" + std::to_string(i));
    }
    SUBCASE("top-1 equals argmax of forward") {
        auto p = text::predict_text("cue3 words", model);
        int best = 0;
        for (int i = 1; i < 4; ++i)
            if (p[i] > p[best]) best = i;
        auto top = text::predict_topk_text("cue3 words", model, 1);
        CHECK(top[0].first == vocab.labels[best]);
    }
    SUBCASE("m out of range throws") {
        CHECK_THROWS(text::predict_topk_text("x", model, 0));
        CHECK_THROWS(text::predict_topk_text("x", model, 5));
    }
}

TEST_CASE("model file round-trips bit-exactly") {
    auto posts = separable_corpus(3, 10);
    auto vocab = letter_vocab(3);
    text::TextTrainConfig cfg;
    cfg.dim = 5;
    cfg.epochs = 2;
    cfg.min_count = 1;
    auto model = text::train_text(posts, posts, vocab, cfg);

    const std::string path = "test_text_model.json";
    text::save_text_model(model, path);
    auto loaded = text::load_text_model(path);
    CHECK(loaded.A == model.A);
    CHECK(loaded.B == model.B);
    CHECK(loaded.bias == model.bias);
    CHECK(loaded.vocab.index == model.vocab.index);
    CHECK(loaded.labels.labels == model.labels.labels);
    std::remove(path.c_str());
}
