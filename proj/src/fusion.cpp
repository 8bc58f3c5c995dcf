#include "emojipred/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace emojipred::fusion {

const char* to_string(Modality m) {
    switch (m) {
        case Modality::Text: return "textual";
        case Modality::Visual: return "visual";
        case Modality::Multimodal: return "multimodal";
    }
    return "?";
}

Modality modality_from_string(const std::string& s) {
    if (s == "textual" || s == "text") return Modality::Text;
    if (s == "visual") return Modality::Visual;
    if (s == "multimodal") return Modality::Multimodal;
    throw std::invalid_argument("unknown modality: " + s);
}

FeatureVector concat(const std::vector<double>& text_emb,
                     const std::vector<double>& vis_emb) {
    FeatureVector out;
    out.tag = Modality::Multimodal;
    out.values = text_emb;
    out.values.insert(out.values.end(), vis_emb.begin(), vis_emb.end());
    for (double v : out.values)
        if (!std::isfinite(v)) throw std::invalid_argument("concat: non-finite input");
    return out;
}

StandardizeStats standardize(std::vector<FeatureVector>& features) {
    if (features.size() < 2)
        throw std::invalid_argument("standardize: need at least 2 samples");
    const size_t dim = features[0].values.size();
    StandardizeStats stats;
    stats.mean.assign(dim, 0.0);
    stats.stddev.assign(dim, 1.0);
    const double n = double(features.size());
    for (const auto& f : features)
        for (size_t j = 0; j < dim; ++j) stats.mean[j] += f.values[j];
    for (double& m : stats.mean) m /= n;
    std::vector<double> var(dim, 0.0);
    for (const auto& f : features)
        for (size_t j = 0; j < dim; ++j) {
            double d = f.values[j] - stats.mean[j];
            var[j] += d * d;
        }
    for (size_t j = 0; j < dim; ++j) {
        double sd = std::sqrt(var[j] / n);
        if (sd < 1e-12) {
            // Constant feature passes through unscaled.
            stats.mean[j] = 0.0;
            stats.stddev[j] = 1.0;
        } else {
            stats.stddev[j] = sd;
        }
    }
    for (auto& f : features)
        for (size_t j = 0; j < dim; ++j)
            f.values[j] = (f.values[j] - stats.mean[j]) / stats.stddev[j];
    return stats;
}

std::vector<double> apply_standardize(const StandardizeStats& stats,
                                      const std::vector<double>& values) {
    if (stats.mean.empty()) return values;
    if (values.size() != stats.mean.size())
        throw std::invalid_argument("apply_standardize: dim mismatch");
    std::vector<double> out(values.size());
    for (size_t j = 0; j < values.size(); ++j)
        out[j] = (values[j] - stats.mean[j]) / stats.stddev[j];
    return out;
}

namespace {

void softmax_inplace(std::vector<double>& s) {
    double mx = *std::max_element(s.begin(), s.end());
    double sum = 0.0;
    for (double& x : s) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (double& x : s) x /= sum;
}

std::vector<double> scores_of(const Matrix& W, const std::vector<double>& b,
                              const std::vector<double>& x) {
    std::vector<double> s(b);
    for (size_t j = 0; j < W.rows(); ++j) {
        const double xj = x[j];
        if (xj == 0.0) continue;
        const double* row = W.row(j);
        for (size_t c = 0; c < W.cols(); ++c) s[c] += row[c] * xj;
    }
    return s;
}

}  // namespace

double logreg_loss_grad(const std::vector<std::vector<double>>& X,
                        const std::vector<int>& y, int k, const Matrix& W,
                        const std::vector<double>& b, double lambda,
                        Matrix* grad_W, std::vector<double>* grad_b) {
    const size_t n = X.size();
    const size_t dim = W.rows();
    if (grad_W) *grad_W = Matrix(dim, k);
    if (grad_b) grad_b->assign(k, 0.0);

    double loss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        auto s = scores_of(W, b, X[i]);
        double mx = *std::max_element(s.begin(), s.end());
        double logsum = 0.0;
        for (double v : s) logsum += std::exp(v - mx);
        logsum = mx + std::log(logsum);
        loss += logsum - s[y[i]];
        if (grad_W || grad_b) {
            softmax_inplace(s);
            s[y[i]] -= 1.0;
            if (grad_W)
                for (size_t j = 0; j < dim; ++j) {
                    const double xj = X[i][j];
                    if (xj == 0.0) continue;
                    double* row = grad_W->row(j);
                    for (int c = 0; c < k; ++c) row[c] += xj * s[c];
                }
            if (grad_b)
                for (int c = 0; c < k; ++c) (*grad_b)[c] += s[c];
        }
    }
    loss /= double(n);
    double reg = 0.0;
    for (double w : W.data()) reg += w * w;
    loss += 0.5 * lambda * reg;
    if (grad_W) {
        for (double& g : grad_W->data()) g /= double(n);
        for (size_t j = 0; j < dim; ++j)
            for (int c = 0; c < k; ++c) (*grad_W)(j, c) += lambda * W(j, c);
    }
    if (grad_b)
        for (double& g : *grad_b) g /= double(n);
    return loss;
}

LogRegParams train_logreg(const std::vector<std::vector<double>>& X,
                          const std::vector<int>& y, int k, double lambda,
                          const LogRegConfig& config) {
    if (X.empty() || X.size() != y.size())
        throw std::invalid_argument("train_logreg: bad inputs");
    const size_t dim = X[0].size();
    for (const auto& row : X)
        if (row.size() != dim)
            throw std::invalid_argument("train_logreg: inconsistent feature dims");
    for (int label : y)
        if (label < 0 || label >= k)
            throw std::invalid_argument("train_logreg: label out of range");

    LogRegParams params;
    params.lambda = lambda;
    params.W = Matrix(dim, k);
    params.b.assign(k, 0.0);
    if (config.init_scale > 0.0) {
        std::mt19937_64 rng(config.seed);
        std::normal_distribution<double> init(0.0, config.init_scale);
        for (double& w : params.W.data()) w = init(rng);
        for (double& v : params.b) v = init(rng);
    }

    Matrix gW;
    std::vector<double> gb;
    double loss = logreg_loss_grad(X, y, k, params.W, params.b, lambda, &gW, &gb);
    double step = 1.0;
    for (int iter = 0; iter < config.max_iters; ++iter) {
        double gnorm2 = 0.0;
        for (double g : gW.data()) gnorm2 += g * g;
        for (double g : gb) gnorm2 += g * g;
        if (std::sqrt(gnorm2) < config.grad_tol) break;

        // Backtracking line search with Armijo condition.
        step = std::min(step * 2.0, 1e6);
        Matrix W_try;
        std::vector<double> b_try;
        double new_loss = loss;
        while (true) {
            W_try = params.W;
            b_try = params.b;
            for (size_t i = 0; i < W_try.data().size(); ++i)
                W_try.data()[i] -= step * gW.data()[i];
            for (size_t c = 0; c < b_try.size(); ++c) b_try[c] -= step * gb[c];
            new_loss = logreg_loss_grad(X, y, k, W_try, b_try, lambda, nullptr, nullptr);
            if (new_loss <= loss - 1e-4 * step * gnorm2 || step < 1e-12) break;
            step *= 0.5;
        }
        if (step < 1e-12) break;
        params.W = std::move(W_try);
        params.b = std::move(b_try);
        loss = logreg_loss_grad(X, y, k, params.W, params.b, lambda, &gW, &gb);
    }
    return params;
}

double logreg_final_loss(const std::vector<std::vector<double>>& X,
                         const std::vector<int>& y, const LogRegParams& params) {
    return logreg_loss_grad(X, y, static_cast<int>(params.W.cols()), params.W,
                            params.b, params.lambda, nullptr, nullptr);
}

std::vector<double> predict(const LogRegParams& params,
                            const std::vector<double>& feature) {
    if (feature.size() != params.W.rows())
        throw std::invalid_argument("predict: feature dim mismatch");
    auto x = apply_standardize(params.stats, feature);
    auto s = scores_of(params.W, params.b, x);
    softmax_inplace(s);
    return s;
}

std::vector<std::pair<int, double>> predict_topk(const LogRegParams& params,
                                                 const std::vector<double>& feature,
                                                 int m) {
    auto p = predict(params, feature);
    if (m < 1 || m > static_cast<int>(p.size()))
        throw std::invalid_argument("predict_topk: m out of range");
    std::vector<int> order(p.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return p[a] > p[b]; });
    std::vector<std::pair<int, double>> out;
    for (int i = 0; i < m; ++i) out.emplace_back(order[i], p[order[i]]);
    return out;
}

namespace detail {

nlohmann::json logreg_to_json(const LogRegParams& p) {
    nlohmann::json j;
    j["dim"] = p.W.rows();
    j["k"] = p.W.cols();
    j["W"] = p.W.data();
    j["b"] = p.b;
    j["lambda"] = p.lambda;
    j["stats_mean"] = p.stats.mean;
    j["stats_std"] = p.stats.stddev;
    return j;
}

LogRegParams logreg_from_json(const nlohmann::json& j) {
    LogRegParams p;
    p.W = Matrix(j.at("dim").get<size_t>(), j.at("k").get<size_t>());
    p.W.data() = j.at("W").get<std::vector<double>>();
    p.b = j.at("b").get<std::vector<double>>();
    p.lambda = j.at("lambda").get<double>();
    p.stats.mean = j.at("stats_mean").get<std::vector<double>>();
    p.stats.stddev = j.at("stats_std").get<std::vector<double>>();
    return p;
}

}  // namespace detail

void save_logreg(const LogRegParams& params, const std::string& path) {
    nlohmann::json j = detail::logreg_to_json(params);
    j["format_version"] = 1;
    j["kind"] = "logreg";
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_logreg: cannot open " + path);
    f << j.dump() << "\n";
}

LogRegParams load_logreg(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_logreg: cannot open " + path);
    return detail::logreg_from_json(nlohmann::json::parse(f));
}

}  // namespace emojipred::fusion
