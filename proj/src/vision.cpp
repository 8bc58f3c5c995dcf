#include "emojipred/vision.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "emojipred/eval.hpp"

namespace emojipred::vision {

namespace {

[[noreturn]] void ppm_fail(const std::string& path, std::istream& f,
                           const std::string& what) {
    auto pos = f.tellg();
    throw std::runtime_error("load_image: " + path + ": " + what +
                             " (byte offset " +
                             std::to_string(pos < 0 ? -1 : long(pos)) + ")");
}

// Next header token, skipping whitespace and '#' comments.
std::string ppm_token(std::istream& f) {
    std::string tok;
    int c;
    while ((c = f.get()) != EOF) {
        if (c == '#') {
            while ((c = f.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

double luminance(const ImageTensor& img, int y, int x) {
    return 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) +
           0.114 * img.at(y, x, 2);
}

}  // namespace

ImageTensor load_image(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_image: cannot open " + path);
    std::string magic = ppm_token(f);
    if (magic != "P3" && magic != "P6") ppm_fail(path, f, "not a PPM P3/P6 file");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(ppm_token(f));
        h = std::stoi(ppm_token(f));
        maxval = std::stoi(ppm_token(f));
    } catch (const std::exception&) {
        ppm_fail(path, f, "malformed header");
    }
    if (w < 1 || h < 1 || maxval < 1 || maxval > 255)
        ppm_fail(path, f, "unsupported dimensions or maxval");

    ImageTensor img;
    img.width = w;
    img.height = h;
    img.rgb.resize(size_t(w) * h * 3);
    const size_t n = img.rgb.size();
    if (magic == "P6") {
        std::vector<unsigned char> buf(n);
        f.read(reinterpret_cast<char*>(buf.data()), std::streamsize(n));
        if (size_t(f.gcount()) != n) ppm_fail(path, f, "truncated pixel data");
        for (size_t i = 0; i < n; ++i) img.rgb[i] = double(buf[i]) / maxval;
    } else {
        for (size_t i = 0; i < n; ++i) {
            long v;
            std::string tok = ppm_token(f);
            if (tok.empty()) ppm_fail(path, f, "truncated pixel data");
            try {
                v = std::stol(tok);
            } catch (const std::exception&) {
                ppm_fail(path, f, "non-numeric sample");
            }
            if (v < 0 || v > maxval) ppm_fail(path, f, "sample out of range");
            img.rgb[i] = double(v) / maxval;
        }
    }
    return img;
}

void save_image_ppm(const ImageTensor& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_image_ppm: cannot open " + path);
    f << "P6\n" << img.width << " " << img.height << "\n255\n";
    for (double v : img.rgb) {
        double c = std::clamp(v, 0.0, 1.0);
        unsigned char b = static_cast<unsigned char>(std::lround(c * 255.0));
        f.write(reinterpret_cast<const char*>(&b), 1);
    }
    if (!f) throw std::runtime_error("save_image_ppm: write failed for " + path);
}

FeatureMaps compute_feature_maps(const ImageTensor& img, int grid) {
    if (grid < 1) throw std::invalid_argument("compute_feature_maps: grid must be >= 1");
    if (img.height < grid || img.width < grid)
        throw std::invalid_argument("compute_feature_maps: image smaller than grid");

    FeatureMaps maps;
    maps.grid = grid;
    maps.channels = kFeatureChannels;
    maps.v.assign(size_t(kFeatureChannels) * grid * grid, 0.0);

    const int th = img.height / grid;
    const int tw = img.width / grid;
    for (int gy = 0; gy < grid; ++gy) {
        for (int gx = 0; gx < grid; ++gx) {
            const int y0 = gy * th, y1 = (gy == grid - 1) ? img.height : (gy + 1) * th;
            const int x0 = gx * tw, x1 = (gx == grid - 1) ? img.width : (gx + 1) * tw;
            const double area = double(y1 - y0) * double(x1 - x0);

            double sr = 0, sg = 0, sb = 0, slum = 0, slum2 = 0, ssat = 0;
            double maxlum = 0;
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) {
                    double r = img.at(y, x, 0), g = img.at(y, x, 1), b = img.at(y, x, 2);
                    sr += r;
                    sg += g;
                    sb += b;
                    double lum = luminance(img, y, x);
                    slum += lum;
                    slum2 += lum * lum;
                    maxlum = std::max(maxlum, lum);
                    double mx = std::max({r, g, b});
                    double mn = std::min({r, g, b});
                    ssat += mx > 0.0 ? (mx - mn) / mx : 0.0;
                }
            }
            double hgrad = 0;
            long hpairs = 0;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x + 1 < x1; ++x) {
                    double dl = luminance(img, y, x + 1) - luminance(img, y, x);
                    hgrad += dl * dl;
                    ++hpairs;
                }
            double vgrad = 0;
            long vpairs = 0;
            for (int y = y0; y + 1 < y1; ++y)
                for (int x = x0; x < x1; ++x) {
                    double dl = luminance(img, y + 1, x) - luminance(img, y, x);
                    vgrad += dl * dl;
                    ++vpairs;
                }

            const double mean_lum = slum / area;
            double var = slum2 / area - mean_lum * mean_lum;
            maps.at(0, gy, gx) = sr / area;
            maps.at(1, gy, gx) = sg / area;
            maps.at(2, gy, gx) = sb / area;
            maps.at(3, gy, gx) = std::sqrt(std::max(var, 0.0));
            maps.at(4, gy, gx) = hpairs > 0 ? hgrad / hpairs : 0.0;
            maps.at(5, gy, gx) = vpairs > 0 ? vgrad / vpairs : 0.0;
            maps.at(6, gy, gx) = ssat / area;
            maps.at(7, gy, gx) = maxlum;
        }
    }
    return maps;
}

std::vector<double> global_average_pool(const FeatureMaps& maps) {
    std::vector<double> out(maps.channels, 0.0);
    const double cells = double(maps.grid) * maps.grid;
    for (int ch = 0; ch < maps.channels; ++ch) {
        double s = 0.0;
        for (int gy = 0; gy < maps.grid; ++gy)
            for (int gx = 0; gx < maps.grid; ++gx) s += maps.at(ch, gy, gx);
        out[ch] = s / cells;
    }
    return out;
}

VisualEmbedding visual_embedding(const corpus::Post& post,
                                 const PrecomputedEmbeddingTable* table, int grid) {
    VisualEmbedding emb;
    if (table) {
        auto it = table->vectors.find(post.id);
        if (it != table->vectors.end()) {
            emb.values = it->second;
            emb.source = EmbeddingSource::Table;
            return emb;
        }
    }
    if (post.visual_vec) {
        emb.values = *post.visual_vec;
        emb.source = EmbeddingSource::InlineVector;
        return emb;
    }
    if (post.image_ref) {
        emb.values = global_average_pool(compute_feature_maps(load_image(*post.image_ref), grid));
        emb.source = EmbeddingSource::Featurizer;
        return emb;
    }
    throw std::runtime_error("visual_embedding: no visual source for post " + post.id);
}

std::vector<double> vision_head_scores(const VisionHeadParams& head,
                                       const std::vector<double>& embedding) {
    const size_t m = head.W.rows();
    const size_t k = head.W.cols();
    if (embedding.size() != m)
        throw std::invalid_argument("vision_head_scores: embedding dim mismatch");
    std::vector<double> scores(head.b);
    for (size_t ch = 0; ch < m; ++ch) {
        const double* row = head.W.row(ch);
        for (size_t c = 0; c < k; ++c) scores[c] += row[c] * embedding[ch];
    }
    return scores;
}

std::vector<double> vision_head_predict(const VisionHeadParams& head,
                                        const std::vector<double>& embedding) {
    auto s = vision_head_scores(head, embedding);
    double mx = *std::max_element(s.begin(), s.end());
    double sum = 0.0;
    for (double& x : s) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (double& x : s) x /= sum;
    return s;
}

VisionHeadParams train_vision_head(const std::vector<corpus::Post>& train,
                                   const std::vector<corpus::Post>& dev,
                                   const corpus::LabelVocabulary& labels,
                                   const VisionTrainConfig& config,
                                   const PrecomputedEmbeddingTable* table) {
    std::vector<std::vector<double>> X;
    std::vector<int> y;
    std::string missing;
    for (const auto& p : train) {
        try {
            X.push_back(visual_embedding(p, table, config.grid).values);
        } catch (const std::exception&) {
            missing += missing.empty() ? p.id : ", " + p.id;
            continue;
        }
        y.push_back(labels.index_of(p.label));
    }
    if (!missing.empty())
        throw std::runtime_error("train_vision_head: posts without visual input: " +
                                 missing);
    if (X.empty()) throw std::invalid_argument("train_vision_head: empty training set");

    const int m = static_cast<int>(X[0].size());
    const int k = labels.k();
    VisionHeadParams head;
    head.W = Matrix(m, k);
    head.b.assign(k, 0.0);

    auto dev_f1 = [&]() {
        std::vector<int> gold, pred;
        for (const auto& p : dev) {
            int g = labels.index_of(p.label);
            if (g < 0) continue;
            auto probs = vision_head_predict(head, visual_embedding(p, table, config.grid).values);
            int best = 0;
            for (int c = 1; c < k; ++c)
                if (probs[c] > probs[best]) best = c;
            gold.push_back(g);
            pred.push_back(best);
        }
        if (gold.empty()) return 0.0;
        return eval::macro_prf(eval::confusion_matrix(gold, pred, k)).f1;
    };

    VisionHeadParams best = head;
    double best_f1 = -1.0;
    int stale = 0;
    const double n = double(X.size());
    Matrix gW(m, k);
    std::vector<double> gb(k);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::fill(gW.data().begin(), gW.data().end(), 0.0);
        std::fill(gb.begin(), gb.end(), 0.0);
        for (size_t i = 0; i < X.size(); ++i) {
            auto p = vision_head_predict(head, X[i]);
            p[y[i]] -= 1.0;
            for (int ch = 0; ch < m; ++ch) {
                const double xv = X[i][ch];
                double* row = gW.row(ch);
                for (int c = 0; c < k; ++c) row[c] += xv * p[c];
            }
            for (int c = 0; c < k; ++c) gb[c] += p[c];
        }
        for (int ch = 0; ch < m; ++ch)
            for (int c = 0; c < k; ++c)
                head.W(ch, c) -= config.lr * (gW(ch, c) / n + config.lambda * head.W(ch, c));
        for (int c = 0; c < k; ++c) head.b[c] -= config.lr * gb[c] / n;

        if (!dev.empty()) {
            double f1 = dev_f1();
            if (f1 > best_f1) {
                best_f1 = f1;
                best = head;
                stale = 0;
            } else if (++stale >= config.patience) {
                break;
            }
        }
    }
    return dev.empty() ? head : best;
}

Matrix class_activation_map(const FeatureMaps& maps, const VisionHeadParams& head,
                            int cls) {
    if (cls < 0 || cls >= static_cast<int>(head.W.cols()))
        throw std::invalid_argument("class_activation_map: class out of range");
    if (static_cast<int>(head.W.rows()) != maps.channels)
        throw std::invalid_argument("class_activation_map: channel count mismatch");
    Matrix cam(maps.grid, maps.grid);
    for (int gy = 0; gy < maps.grid; ++gy)
        for (int gx = 0; gx < maps.grid; ++gx) {
            double s = 0.0;
            for (int ch = 0; ch < maps.channels; ++ch)
                s += head.W(ch, cls) * maps.at(ch, gy, gx);
            cam(gy, gx) = s;
        }
    return cam;
}

void render_heatmap(const Matrix& heatmap, const std::string& path) {
    const auto& v = heatmap.data();
    double lo = *std::min_element(v.begin(), v.end());
    double hi = *std::max_element(v.begin(), v.end());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("render_heatmap: cannot open " + path);
    f << "P5\n" << heatmap.cols() << " " << heatmap.rows() << "\n255\n";
    for (double x : v) {
        unsigned char px = 128;  // constant maps render mid-gray
        if (hi - lo > 0.0)
            px = static_cast<unsigned char>(std::lround((x - lo) / (hi - lo) * 255.0));
        f.write(reinterpret_cast<const char*>(&px), 1);
    }
    if (!f) throw std::runtime_error("render_heatmap: write failed for " + path);
}

PgmImage load_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_pgm: cannot open " + path);
    if (ppm_token(f) != "P5") throw std::runtime_error("load_pgm: not a P5 file: " + path);
    PgmImage img;
    img.width = std::stoi(ppm_token(f));
    img.height = std::stoi(ppm_token(f));
    int maxval = std::stoi(ppm_token(f));
    (void)maxval;
    img.pixels.resize(size_t(img.width) * img.height);
    f.read(reinterpret_cast<char*>(img.pixels.data()),
           std::streamsize(img.pixels.size()));
    if (size_t(f.gcount()) != img.pixels.size())
        throw std::runtime_error("load_pgm: truncated pixel data in " + path);
    return img;
}

PrecomputedEmbeddingTable load_embedding_table(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_embedding_table: cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line.rfind("dim=", 0) != 0)
        throw std::runtime_error("load_embedding_table: " + path +
                                 ": first line must be dim=<N>");
    PrecomputedEmbeddingTable table;
    table.dim = std::stoi(line.substr(4));
    if (table.dim < 1)
        throw std::runtime_error("load_embedding_table: invalid dim in " + path);
    size_t row = 1;
    while (std::getline(f, line)) {
        ++row;
        if (line.empty()) continue;
        std::istringstream in(line);
        std::string id;
        if (!std::getline(in, id, '\t'))
            throw std::runtime_error("load_embedding_table: " + path + " row " +
                                     std::to_string(row) + ": missing id");
        std::vector<double> vec;
        std::string field;
        while (std::getline(in, field, '\t')) vec.push_back(std::stod(field));
        if (static_cast<int>(vec.size()) != table.dim)
            throw std::runtime_error("load_embedding_table: " + path + " row " +
                                     std::to_string(row) + ": expected " +
                                     std::to_string(table.dim) + " values, got " +
                                     std::to_string(vec.size()));
        if (!table.vectors.emplace(id, std::move(vec)).second)
            throw std::runtime_error("load_embedding_table: " + path + " row " +
                                     std::to_string(row) + ": duplicate id " + id);
    }
    return table;
}

void save_embedding_table(const PrecomputedEmbeddingTable& table,
                          const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_embedding_table: cannot open " + path);
    f << "dim=" << table.dim << "\n";
    // Sorted ids keep re-runs byte-identical.
    std::vector<std::string> ids;
    ids.reserve(table.vectors.size());
    for (const auto& [id, _] : table.vectors) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    char buf[64];
    for (const auto& id : ids) {
        f << id;
        for (double v : table.vectors.at(id)) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            f << "\t" << buf;
        }
        f << "\n";
    }
}

void save_vision_head(const VisionHeadParams& head, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["kind"] = "vision_head";
    j["channels"] = head.W.rows();
    j["k"] = head.W.cols();
    j["W"] = head.W.data();
    j["b"] = head.b;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_vision_head: cannot open " + path);
    f << j.dump() << "\n";
}

VisionHeadParams load_vision_head(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_vision_head: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(f);
    VisionHeadParams head;
    head.W = Matrix(j.at("channels").get<size_t>(), j.at("k").get<size_t>());
    head.W.data() = j.at("W").get<std::vector<double>>();
    head.b = j.at("b").get<std::vector<double>>();
    return head;
}

}  // namespace emojipred::vision
