#include "emojipred/text_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "emojipred/eval.hpp"

namespace emojipred::text {

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    size_t i = 0;
    const size_t n = text.size();
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    auto is_punct = [](unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; };
    while (i < n) {
        while (i < n && is_space(text[i])) ++i;
        size_t j = i;
        while (j < n && !is_space(text[j])) ++j;
        if (j > i) {
            std::string tok = text.substr(i, j - i);
            for (char& c : tok)
                c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            size_t b = 0, e = tok.size();
            // '#'/'@' prefixes survive; other surrounding punctuation is stripped.
            if (!(tok[0] == '#' || tok[0] == '@'))
                while (b < e && is_punct(tok[b])) ++b;
            while (e > b && is_punct(tok[e - 1])) --e;
            if (e > b) out.push_back(tok.substr(b, e - b));
        }
        i = j;
    }
    return out;
}

int TextVocab::lookup(const std::string& token) const {
    auto it = index.find(token);
    return it == index.end() ? -1 : it->second;
}

TextVocab TextVocab::build(const std::vector<corpus::Post>& posts, int min_count) {
    std::unordered_map<std::string, long long> counts;
    for (const auto& p : posts)
        for (const auto& t : tokenize(p.text)) ++counts[t];
    std::vector<std::pair<std::string, long long>> kept;
    for (const auto& [tok, c] : counts)
        if (c >= min_count) kept.emplace_back(tok, c);
    // Deterministic index assignment: frequent first, then lexicographic.
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    TextVocab v;
    v.min_count = min_count;
    for (size_t i = 0; i < kept.size(); ++i)
        v.index.emplace(kept[i].first, static_cast<int>(i));
    return v;
}

BagOfFeatures bag_of_features(const std::vector<std::string>& tokens,
                              const TextModel& model) {
    BagOfFeatures bag;
    bag.h.assign(model.dim, 0.0);
    for (const auto& t : tokens) {
        int row = model.vocab.lookup(t);
        if (row < 0) continue;
        const double* a = model.A.row(row);
        for (int d = 0; d < model.dim; ++d) bag.h[d] += a[d];
        ++bag.token_count;
    }
    if (bag.token_count > 0)
        for (double& x : bag.h) x /= bag.token_count;
    if (model.normalize_embedding) {
        double norm = 0.0;
        for (double x : bag.h) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > 0.0)
            for (double& x : bag.h) x /= norm;
    }
    return bag;
}

namespace {

std::vector<double> softmax(std::vector<double> scores) {
    double mx = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (double& s : scores) {
        s = std::exp(s - mx);
        sum += s;
    }
    for (double& s : scores) s /= sum;
    return scores;
}

std::vector<double> class_scores(const std::vector<double>& h,
                                 const TextModel& model) {
    const int k = model.k();
    std::vector<double> scores(model.bias.begin(), model.bias.end());
    for (int d = 0; d < model.dim; ++d) {
        const double hd = h[d];
        if (hd == 0.0) continue;
        const double* brow = model.B.row(d);
        for (int j = 0; j < k; ++j) scores[j] += brow[j] * hd;
    }
    return scores;
}

int argmax_tiebreak_low(const std::vector<double>& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

}  // namespace

std::vector<double> forward(const std::vector<double>& h, const TextModel& model) {
    if (static_cast<int>(h.size()) != model.dim)
        throw std::invalid_argument("forward: embedding dim mismatch");
    for (double x : h)
        if (!std::isfinite(x)) throw std::invalid_argument("forward: non-finite input");
    return softmax(class_scores(h, model));
}

double nll_loss(const std::vector<corpus::Post>& batch, const TextModel& model) {
    if (batch.empty()) throw std::invalid_argument("nll_loss: empty batch");
    double total = 0.0;
    for (const auto& post : batch) {
        int gold = model.labels.index_of(post.label);
        if (gold < 0)
            throw std::invalid_argument("nll_loss: label not in vocabulary: " +
                                        post.label);
        auto bag = bag_of_features(tokenize(post.text), model);
        auto p = forward(bag.h, model);
        total -= std::log(std::max(p[gold], 1e-300));
    }
    return total / batch.size();
}

TextGradients nll_grad(const std::vector<corpus::Post>& batch, const TextModel& model) {
    if (batch.empty()) throw std::invalid_argument("nll_grad: empty batch");
    const int d = model.dim;
    const int k = model.k();
    TextGradients grads;
    grads.dA = Matrix(model.vocab.size(), d);
    grads.dB = Matrix(d, k);
    grads.dbias.assign(k, 0.0);

    std::vector<double> dh(d);
    for (const auto& post : batch) {
        int gold = model.labels.index_of(post.label);
        if (gold < 0)
            throw std::invalid_argument("nll_grad: label not in vocabulary: " +
                                        post.label);
        std::vector<int> rows;
        for (const auto& t : tokenize(post.text)) {
            int r = model.vocab.lookup(t);
            if (r >= 0) rows.push_back(r);
        }
        const int cnt = static_cast<int>(rows.size());

        std::vector<double> raw_h(d, 0.0);
        for (int r : rows)
            for (int j = 0; j < d; ++j) raw_h[j] += model.A(r, j);
        if (cnt > 0)
            for (double& x : raw_h) x /= cnt;
        std::vector<double> h = raw_h;
        double norm = 0.0;
        if (model.normalize_embedding) {
            for (double x : h) norm += x * x;
            norm = std::sqrt(norm);
            if (norm > 0.0)
                for (double& x : h) x /= norm;
        }

        auto g = softmax(class_scores(h, model));
        g[gold] -= 1.0;

        for (int j = 0; j < d; ++j) {
            double s = 0.0;
            const double* brow = model.B.row(j);
            for (int c = 0; c < k; ++c) s += brow[c] * g[c];
            dh[j] = s;
        }
        for (int j = 0; j < d; ++j) {
            double* brow = grads.dB.row(j);
            for (int c = 0; c < k; ++c) brow[c] += h[j] * g[c];
        }
        for (int c = 0; c < k; ++c) grads.dbias[c] += g[c];

        if (cnt == 0) continue;
        if (model.normalize_embedding && norm > 0.0) {
            double dot = 0.0;
            for (int j = 0; j < d; ++j) dot += dh[j] * h[j];
            for (int j = 0; j < d; ++j) dh[j] = (dh[j] - dot * h[j]) / norm;
        }
        for (int r : rows)
            for (int j = 0; j < d; ++j) grads.dA(r, j) += dh[j] / cnt;
    }
    const double n = double(batch.size());
    for (double& x : grads.dA.data()) x /= n;
    for (double& x : grads.dB.data()) x /= n;
    for (double& x : grads.dbias) x /= n;
    return grads;
}

namespace {

double dev_macro_f1(const TextModel& model, const std::vector<corpus::Post>& dev) {
    std::vector<int> gold, pred;
    for (const auto& post : dev) {
        int g = model.labels.index_of(post.label);
        if (g < 0) continue;
        gold.push_back(g);
        pred.push_back(argmax_tiebreak_low(predict_text(post.text, model)));
    }
    if (gold.empty()) return 0.0;
    return eval::macro_prf(eval::confusion_matrix(gold, pred, model.k())).f1;
}

}  // namespace

TextModel train_text(const std::vector<corpus::Post>& train,
                     const std::vector<corpus::Post>& dev,
                     const corpus::LabelVocabulary& labels,
                     const TextTrainConfig& config) {
    if (train.empty()) throw std::invalid_argument("train_text: empty training set");

    TextModel model;
    model.labels = labels;
    model.vocab = TextVocab::build(train, config.min_count);
    model.dim = config.dim;
    model.normalize_embedding = config.normalize_embedding;
    const int V = model.vocab.size();
    const int k = labels.k();
    const int d = config.dim;

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> init(-1.0 / d, 1.0 / d);
    model.A = Matrix(V, d);
    for (double& x : model.A.data()) x = init(rng);
    model.B = Matrix(d, k);
    model.bias.assign(k, 0.0);

    // Tokenize once.
    std::vector<std::vector<int>> rows(train.size());
    std::vector<int> gold(train.size());
    for (size_t i = 0; i < train.size(); ++i) {
        gold[i] = labels.index_of(train[i].label);
        if (gold[i] < 0)
            throw std::invalid_argument("train_text: label not in vocabulary: " +
                                        train[i].label);
        for (const auto& t : tokenize(train[i].text)) {
            int r = model.vocab.lookup(t);
            if (r >= 0) rows[i].push_back(r);
        }
    }

    const long long planned = static_cast<long long>(config.epochs) * train.size();
    long long step = 0;
    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    TextModel best = model;
    double best_f1 = -1.0;
    int stale = 0;

    std::vector<double> raw_h(d), g(k), dh(d);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (size_t idx : order) {
            const double lr = config.lr0 * (1.0 - double(step) / double(planned));
            ++step;
            const auto& toks = rows[idx];
            const int cnt = static_cast<int>(toks.size());

            std::fill(raw_h.begin(), raw_h.end(), 0.0);
            for (int r : toks)
                for (int j = 0; j < d; ++j) raw_h[j] += model.A(r, j);
            if (cnt > 0)
                for (double& x : raw_h) x /= cnt;

            std::vector<double> h = raw_h;
            double norm = 0.0;
            if (model.normalize_embedding) {
                for (double x : h) norm += x * x;
                norm = std::sqrt(norm);
                if (norm > 0.0)
                    for (double& x : h) x /= norm;
            }

            auto p = softmax(class_scores(h, model));
            for (int j = 0; j < k; ++j) g[j] = p[j];
            g[gold[idx]] -= 1.0;

            // dL/dh before the B update.
            for (int j = 0; j < d; ++j) {
                double s = 0.0;
                const double* brow = model.B.row(j);
                for (int c = 0; c < k; ++c) s += brow[c] * g[c];
                dh[j] = s;
            }
            for (int j = 0; j < d; ++j) {
                double* brow = model.B.row(j);
                const double hj = h[j];
                for (int c = 0; c < k; ++c) brow[c] -= lr * hj * g[c];
            }
            if (config.output_bias)
                for (int c = 0; c < k; ++c) model.bias[c] -= lr * g[c];

            if (cnt == 0) continue;
            if (model.normalize_embedding && norm > 0.0) {
                // Back through hn = h/||h||: (I - hn hn^T)/||h||.
                double dot = 0.0;
                for (int j = 0; j < d; ++j) dot += dh[j] * h[j];
                for (int j = 0; j < d; ++j) dh[j] = (dh[j] - dot * h[j]) / norm;
            }
            const double scale = lr / cnt;
            for (int r : toks)
                for (int j = 0; j < d; ++j) model.A(r, j) -= scale * dh[j];
        }

        double f1 = dev.empty() ? 0.0 : dev_macro_f1(model, dev);
        if (f1 > best_f1) {
            best_f1 = f1;
            best = model;
            stale = 0;
        } else if (++stale >= config.patience && !dev.empty()) {
            break;
        }
    }
    return dev.empty() ? model : best;
}

std::vector<double> embed_text(const std::string& text, const TextModel& model) {
    return bag_of_features(tokenize(text), model).h;
}

std::vector<double> predict_text(const std::string& text, const TextModel& model) {
    return forward(embed_text(text, model), model);
}

std::vector<std::pair<std::string, double>> predict_topk_text(
    const std::string& text, const TextModel& model, int m) {
    if (m < 1 || m > model.k())
        throw std::invalid_argument("predict_topk_text: m out of range");
    auto p = predict_text(text, model);
    std::vector<int> order(p.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return p[a] > p[b]; });
    std::vector<std::pair<std::string, double>> out;
    for (int i = 0; i < m; ++i)
        out.emplace_back(model.labels.labels[order[i]], p[order[i]]);
    return out;
}

void save_text_model(const TextModel& model, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["kind"] = "text_model";
    j["dim"] = model.dim;
    j["normalize_embedding"] = model.normalize_embedding;
    j["labels"] = model.labels.labels;
    j["label_counts"] = model.labels.counts;
    j["min_count"] = model.vocab.min_count;
    std::vector<std::string> tokens(model.vocab.size());
    for (const auto& [tok, idx] : model.vocab.index) tokens[idx] = tok;
    j["tokens"] = tokens;
    j["A"] = model.A.data();
    j["B"] = model.B.data();
    j["bias"] = model.bias;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_text_model: cannot open " + path);
    f << j.dump() << "\n";
    if (!f) throw std::runtime_error("save_text_model: write failed for " + path);
}

TextModel load_text_model(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_text_model: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(f);
    if (j.value("kind", std::string()) != "text_model")
        throw std::runtime_error("load_text_model: not a text model file: " + path);
    TextModel model;
    model.dim = j.at("dim").get<int>();
    model.normalize_embedding = j.at("normalize_embedding").get<bool>();
    model.labels.labels = j.at("labels").get<std::vector<std::string>>();
    model.labels.counts = j.at("label_counts").get<std::vector<long long>>();
    model.vocab.min_count = j.at("min_count").get<int>();
    auto tokens = j.at("tokens").get<std::vector<std::string>>();
    for (size_t i = 0; i < tokens.size(); ++i)
        model.vocab.index.emplace(tokens[i], static_cast<int>(i));
    const int V = static_cast<int>(tokens.size());
    model.A = Matrix(V, model.dim);
    model.A.data() = j.at("A").get<std::vector<double>>();
    model.B = Matrix(model.dim, model.labels.k());
    model.B.data() = j.at("B").get<std::vector<double>>();
    model.bias = j.at("bias").get<std::vector<double>>();
    return model;
}

}  // namespace emojipred::text
