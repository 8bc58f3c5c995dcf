#include "emojipred/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "emojipred/emoji.hpp"
#include "emojipred/utf8.hpp"

namespace emojipred::corpus {

const char* to_string(FilterReject r) {
    switch (r) {
        case FilterReject::NoEmoji: return "NoEmoji";
        case FilterReject::MultipleEmoji: return "MultipleEmoji";
        case FilterReject::TooShort: return "TooShort";
    }
    return "?";
}

int LabelVocabulary::index_of(const std::string& label) const {
    for (size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return static_cast<int>(i);
    return -1;
}

namespace {

std::vector<std::string> whitespace_split(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ' ';
        out += parts[i];
    }
    return out;
}

}  // namespace

ExtractResult extract_label(const std::string& raw_text) {
    ExtractResult res;
    auto cps = utf8_decode(raw_text);
    auto spans = find_emoji(cps);
    if (spans.empty()) {
        res.reason = FilterReject::NoEmoji;
        return res;
    }
    if (spans.size() > 1) {
        res.reason = FilterReject::MultipleEmoji;
        return res;
    }
    auto [off, len] = spans[0];
    res.emoji = utf8_encode(
        std::vector<char32_t>(cps.begin() + off, cps.begin() + off + len));
    std::vector<char32_t> rest(cps.begin(), cps.begin() + off);
    rest.insert(rest.end(), cps.begin() + off + len, cps.end());
    auto words = whitespace_split(utf8_encode(rest));
    if (words.size() < 4) {
        res.reason = FilterReject::TooShort;
        return res;
    }
    res.accepted = true;
    res.clean_text = join(words);
    return res;
}

LabelVocabulary build_label_vocab(const std::vector<Post>& posts, int k) {
    if (k < 1) throw std::invalid_argument("build_label_vocab: k must be >= 1");
    std::map<std::string, long long> counts;
    for (const auto& p : posts) ++counts[p.label];
    if (k > static_cast<int>(counts.size()))
        throw std::invalid_argument(
            "build_label_vocab: k exceeds distinct label count (" +
            std::to_string(counts.size()) + ")");
    std::vector<std::pair<std::string, long long>> items(counts.begin(),
                                                         counts.end());
    // Descending count; the map already yields ascending codepoint order,
    // which stable_sort keeps as the tie-break.
    std::stable_sort(items.begin(), items.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    LabelVocabulary vocab;
    for (int i = 0; i < k; ++i) {
        vocab.labels.push_back(items[i].first);
        vocab.counts.push_back(items[i].second);
    }
    return vocab;
}

std::vector<Post> filter_topk(const std::vector<Post>& posts,
                              const LabelVocabulary& vocab) {
    std::vector<Post> out;
    for (const auto& p : posts)
        if (vocab.index_of(p.label) >= 0) out.push_back(p);
    return out;
}

DatasetSplit split(const std::vector<Post>& posts, uint64_t seed) {
    const size_t n = posts.size();
    if (n < 10)
        throw std::invalid_argument("split: need at least 10 posts, got " +
                                    std::to_string(n));
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    const size_t n_train = n * 8 / 10;
    const size_t n_dev = n / 10;
    DatasetSplit out;
    out.seed = seed;
    for (size_t i = 0; i < n; ++i) {
        const Post& p = posts[order[i]];
        if (i < n_train)
            out.train.push_back(p);
        else if (i < n_train + n_dev)
            out.dev.push_back(p);
        else
            out.test.push_back(p);
    }
    return out;
}

namespace {

const std::vector<std::string>& filler_words() {
    static const std::vector<std::string> words = {
        "the",   "a",     "today", "just",  "really", "with",  "and",
        "some",  "good",  "time",  "out",   "here",   "this",  "day",
        "night", "back",  "again", "going", "little", "about", "over",
        "more",  "thing", "made",  "see",   "new",    "one",   "all",
        "best",  "great", "nice",  "fun",   "been",   "every", "much",
        "look",  "feel",  "like",  "still", "home"};
    return words;
}

// (R,G,B) for an evenly spaced hue wheel, s=v=0.9.
void class_color(int c, int k, double& r, double& g, double& b) {
    double h = 6.0 * double(c) / double(std::max(k, 1));
    double v = 0.9, s = 0.9;
    int i = int(h) % 6;
    double f = h - std::floor(h);
    double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (i) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

// Channel layout mirrors the built-in featurizer: mean R/G/B, luminance
// std, gradient energies, mean saturation, max brightness.
std::vector<double> color_signature(int cls, int k, bool neutral,
                                    std::mt19937_64& rng) {
    double r = 0.5, g = 0.5, b = 0.5, sat = 0.0, bright = 0.5;
    if (!neutral) {
        class_color(cls, k, r, g, b);
        sat = 0.9;
        bright = 0.9;
    }
    std::vector<double> v = {r, g, b, 0.02, 0.01, 0.01, sat, bright};
    std::normal_distribution<double> noise(0.0, 0.03);
    for (double& x : v) x += noise(rng);
    return v;
}

}  // namespace

std::vector<Post> generate_synthetic(const SyntheticSpec& spec) {
    std::vector<bool> text_on(spec.k, false), image_on(spec.k, false);
    for (int c : spec.text_signal_classes) text_on.at(c) = true;
    for (int c : spec.image_signal_classes) image_on.at(c) = true;
    for (int c = 0; c < spec.k; ++c)
        if (!text_on[c] && !image_on[c])
            throw std::invalid_argument(
                "generate_synthetic: class " + std::to_string(c) +
                " carries no signal in either modality");
    const auto& emoji = default_emoji_labels();
    if (spec.k > static_cast<int>(emoji.size()))
        throw std::invalid_argument("generate_synthetic: k exceeds emoji table");

    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<int> cls_dist(0, spec.k - 1);
    std::uniform_int_distribution<int> len_dist(5, 10);
    std::uniform_int_distribution<size_t> word_dist(0, filler_words().size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto other_class = [&](int c) {
        int o = cls_dist(rng);
        while (o == c && spec.k > 1) o = cls_dist(rng);
        return o;
    };

    std::vector<Post> posts;
    posts.reserve(spec.n);
    for (int i = 0; i < spec.n; ++i) {
        int cls = i % spec.k;  // balanced classes
        Post p;
        p.id = "synth-" + std::to_string(i);
        p.label = emoji[cls];

        std::vector<std::string> words;
        int len = len_dist(rng);
        for (int w = 0; w < len; ++w) words.push_back(filler_words()[word_dist(rng)]);
        if (text_on[cls]) {
            int cue_cls = unit(rng) < spec.noise_rate ? other_class(cls) : cls;
            std::string cue = "cue" + std::to_string(cue_cls);
            std::uniform_int_distribution<size_t> pos(0, words.size());
            words.insert(words.begin() + pos(rng), cue);
            words.insert(words.begin() + pos(rng), cue);
        }
        p.text = join(words);

        if (image_on[cls]) {
            int sig_cls = unit(rng) < spec.noise_rate ? other_class(cls) : cls;
            p.visual_vec = color_signature(sig_cls, spec.k, false, rng);
        } else {
            p.visual_vec = color_signature(cls, spec.k, true, rng);
        }
        posts.push_back(std::move(p));
    }
    return posts;
}

std::vector<Post> load_posts(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_posts: cannot open " + path);
    std::vector<Post> posts;
    std::string line;
    size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            Post p;
            p.id = j.at("id").get<std::string>();
            p.text = j.at("text").get<std::string>();
            p.label = j.value("label", std::string());
            if (j.contains("image")) p.image_ref = j["image"].get<std::string>();
            if (j.contains("visual_vec"))
                p.visual_vec = j["visual_vec"].get<std::vector<double>>();
            posts.push_back(std::move(p));
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("load_posts: " + path + " line " +
                                     std::to_string(line_no) + ": " + e.what());
        }
    }
    return posts;
}

void save_posts(const std::vector<Post>& posts, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_posts: cannot open " + path);
    for (const auto& p : posts) {
        nlohmann::json j;
        j["id"] = p.id;
        j["text"] = p.text;
        if (!p.label.empty()) j["label"] = p.label;
        if (p.image_ref) j["image"] = *p.image_ref;
        if (p.visual_vec) j["visual_vec"] = *p.visual_vec;
        f << j.dump() << "\n";
    }
    if (!f) throw std::runtime_error("save_posts: write failed for " + path);
}

void save_vocab(const LabelVocabulary& vocab, const std::string& path) {
    nlohmann::json j;
    j["k"] = vocab.k();
    j["labels"] = vocab.labels;
    j["counts"] = vocab.counts;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_vocab: cannot open " + path);
    f << j.dump(2) << "\n";
}

LabelVocabulary load_vocab(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_vocab: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(f);
    LabelVocabulary vocab;
    vocab.labels = j.at("labels").get<std::vector<std::string>>();
    vocab.counts = j.at("counts").get<std::vector<long long>>();
    return vocab;
}

}  // namespace emojipred::corpus
